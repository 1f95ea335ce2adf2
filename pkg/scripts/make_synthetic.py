"""Regenerate the bundled synthetic dataset and the replication config.

    python3 scripts/make_synthetic.py [--seed 2024]
"""

import argparse
from pathlib import Path

import yaml

from macrofactors.synthetic import build_bundle, replication_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    paths = build_bundle(ROOT / "data" / "synthetic", seed=args.seed)
    for p in paths.values():
        print("wrote", p.relative_to(ROOT))

    cfg = replication_config(data_dir="../data/synthetic")
    cfg["output_dir"] = "../out/replication"
    (ROOT / "configs" / "replication.yaml").write_text(yaml.safe_dump(cfg, sort_keys=False, allow_unicode=True))
    small = replication_config(data_dir="../data/synthetic", factor_counts=(1, 2, 3))
    small["output_dir"] = "../out/quick"
    small["pricing"]["factor_counts"] = [2, 3]
    small["em"] = {"max_iter": 60, "tol": 1.0e-5}
    (ROOT / "configs" / "quick.yaml").write_text(yaml.safe_dump(small, sort_keys=False, allow_unicode=True))
    print("wrote configs/replication.yaml, configs/quick.yaml")


if __name__ == "__main__":
    main()
