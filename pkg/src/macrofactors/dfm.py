"""Dynamic factor model: PCA start, EM maximum likelihood, diagnostics, simulation."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EstimationError, ParameterError, SizeError, StabilityError
from .kalman import (
    FilterOutput,
    StateSpaceParams,
    _sym,
    kalman_filter,
    kalman_smoother,
    spectral_radius,
    stationary_cov,
)
from .panel import MONTH, Panel, write_series_csv

log = logging.getLogger(__name__)

R_FLOOR = 1e-4
Q_FLOOR = 1e-6
PCA_MAX_MODULUS = 0.98
EM_MAX_MODULUS = 0.999
STABLE_COND = 1e6
MODERATE_COND = 1e12


def _floor_eigs(A: np.ndarray, floor: float) -> np.ndarray:
    w, V = np.linalg.eigh(_sym(A))
    return _sym((V * np.maximum(w, floor)) @ V.T)


def _clip_spectrum(A: np.ndarray, max_modulus: float) -> np.ndarray:
    w, V = np.linalg.eig(A)
    big = np.abs(w) > max_modulus
    if not big.any():
        return A
    w = np.where(big, w / np.abs(w) * max_modulus, w)
    return np.real(V @ np.diag(w) @ np.linalg.inv(V))


def _filled(panel) -> np.ndarray:
    X = np.array(getattr(panel, "values", panel), float)
    mu = np.nanmean(X, axis=0)
    return np.where(np.isnan(X), mu, X)


def pca_init(panel, K: int) -> StateSpaceParams:
    """Principal-components starting values.

    Loadings are the top-K eigenvectors of the sample covariance scaled by
    the square roots of their eigenvalues, so the projected factors have unit
    variance. Missing entries are mean-filled for this step only.
    """
    X = _filled(panel)
    n, M = X.shape
    if not 1 <= K <= M:
        raise ParameterError(f"factor count K={K} must be in [1, {M}]")
    if n < K + 2:
        raise SizeError(f"need more than K+1={K + 1} observations, got {n}")
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / (n - 1)
    w, V = np.linalg.eigh(_sym(C))
    order = np.argsort(w)[::-1][:K]
    w, V = np.maximum(w[order], 1e-12), V[:, order]
    # sign convention: largest-magnitude loading positive
    V = V * np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(K)])
    Z = V * np.sqrt(w)
    F = Xc @ V / np.sqrt(w)
    resid = Xc - F @ Z.T
    R = np.diag(np.maximum(resid.var(axis=0, ddof=1), R_FLOOR))
    F0, F1 = F[:-1], F[1:]
    Tm = np.linalg.lstsq(F0, F1, rcond=None)[0].T
    Tm = _clip_spectrum(Tm, PCA_MAX_MODULUS)
    U = F1 - F0 @ Tm.T
    Q = _floor_eigs(np.atleast_2d(np.cov(U, rowvar=False)), Q_FLOOR)
    return StateSpaceParams(Z, Tm, R, Q)


def n_parameters(M: int, K: int) -> int:
    """Free parameters net of the K(K-1)/2 rotational degrees of freedom."""
    return M * K + K * K + M + K * (K + 1) // 2 - K * (K - 1) // 2


def information_criteria(loglik: float, n_params: int, T_obs: int) -> tuple[float, float]:
    if T_obs < 2:
        raise SizeError(f"T_obs must be >= 2, got {T_obs}")
    return -2 * loglik + 2 * n_params, -2 * loglik + math.log(T_obs) * n_params


def condition_number_of(params: StateSpaceParams) -> float:
    """2-norm condition number of the model-implied covariance of x_t."""
    s = np.linalg.svd(params.implied_cov(), compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else math.inf


def stability_label(cond: float) -> str:
    if cond < STABLE_COND:
        return "Stable"
    if cond < MODERATE_COND:
        return "Moderate"
    return "Unstable"


def identify(params: StateSpaceParams) -> tuple[StateSpaceParams, np.ndarray]:
    """Rotate so Z'Z is diagonal and decreasing, largest loading per column positive.

    Returns the rotated parameters and the orthogonal U with g_t = U f_t.
    """
    Z = params.Z
    w, V = np.linalg.eigh(Z.T @ Z)
    V = V[:, np.argsort(w)[::-1]]
    ZV = Z @ V
    V = V * np.sign(ZV[np.argmax(np.abs(ZV), axis=0), np.arange(V.shape[1])])
    U = V.T
    return params.rotate(U), U


def _expected_moments(filt: FilterOutput, params: StateSpaceParams):
    sm = kalman_smoother(params, filt)
    a, P = sm.states, sm.covs
    a_prev = np.vstack([sm.initial_state[None], a[:-1]])
    P_prev = np.concatenate([sm.initial_cov[None], P[:-1]])
    S11 = a.T @ a + P.sum(axis=0)
    S00 = a_prev.T @ a_prev + P_prev.sum(axis=0)
    S10 = a.T @ a_prev + sm.lag_cov.sum(axis=0)
    return sm, S11, S00, S10


def em_step(X: np.ndarray, params: StateSpaceParams, filt: FilterOutput) -> StateSpaceParams:
    """One closed-form M-step from the smoothed moments of ``filt``."""
    n, M = X.shape
    K = params.n_factors
    sm, S11, S00, S10 = _expected_moments(filt, params)
    a, P = sm.states, sm.covs
    obs = filt.observed
    X0 = np.where(obs, X, 0.0)

    # transition block
    Tm = np.linalg.solve(S00, S10.T).T
    if spectral_radius(Tm) >= EM_MAX_MODULUS:
        Tm = _clip_spectrum(Tm, EM_MAX_MODULUS)
    Q = (S11 - Tm @ S10.T - S10 @ Tm.T + Tm @ S00 @ Tm.T) / n
    Q = _floor_eigs(Q, Q_FLOOR)

    # measurement block, row by row over observed periods
    Eff = a[:, :, None] * a[:, None, :] + P  # n x K x K
    if obs.all():
        Z = np.linalg.solve(S11, (X0.T @ a).T).T
    else:
        A = np.einsum("ti,tjk->ijk", obs.astype(float), Eff)
        B = X0.T @ a
        Z = np.linalg.solve(A, B[:, :, None])[:, :, 0]
    fitted = a @ Z.T
    quad = np.einsum("ik,tkl,il->ti", Z, P, Z)
    err = np.where(obs, (X0 - fitted) ** 2 + quad, 0.0)
    counts = np.maximum(obs.sum(axis=0), 1)
    r = np.maximum(err.sum(axis=0) / counts, R_FLOOR)
    return StateSpaceParams(Z, Tm, np.diag(r), Q)


@dataclass(frozen=True, eq=False)
class DFMFit:
    params: StateSpaceParams
    k: int
    loglik: float
    aic: float
    bic: float
    n_params: int
    condition_number: float
    factors: np.ndarray
    factor_covs: np.ndarray
    trace: tuple[float, ...]
    converged: bool
    stop_reason: str
    n_obs: int
    timestamps: np.ndarray | None = None
    options: dict = field(default_factory=dict)

    @property
    def n_iter(self) -> int:
        return len(self.trace) - 1

    @property
    def stability(self) -> str:
        return stability_label(self.condition_number)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "params": self.params.to_dict(),
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "n_params": self.n_params,
            "condition_number": self.condition_number,
            "n_obs": self.n_obs,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "trace": list(self.trace),
            "options": self.options,
        }

    def save(self, directory: str | Path, stem: str | None = None) -> tuple[Path, Path]:
        """Write ``<stem>.json`` (fit) and ``<stem>_factors.csv`` (smoothed factors)."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        stem = stem or f"dfm_k{self.k}"
        jp = d / f"{stem}.json"
        jp.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        cp = d / f"{stem}_factors.csv"
        ts = self.timestamps if self.timestamps is not None else np.datetime64("2000-01", "M") + np.arange(self.n_obs) * MONTH
        write_series_csv(cp, ts, [f"F{j + 1}" for j in range(self.k)], self.factors)
        return jp, cp


def fit_mle(
    panel,
    K: int,
    max_iter: int = 500,
    tol: float = 1e-6,
    seed: int = 0,
    init: StateSpaceParams | None = None,
) -> DFMFit:
    """Maximum likelihood by EM, started from principal components.

    Stops when the relative log-likelihood change drops below ``tol``, when
    ``max_iter`` M-steps have run (flagged, not an error), or when an M-step
    would lower the likelihood; in that last case the previous parameters are
    kept so the recorded trace never decreases. ``seed`` is recorded for
    provenance only, the algorithm is deterministic.
    """
    X = np.array(getattr(panel, "values", panel), float)
    n, M = X.shape
    params = init if init is not None else pca_init(X, K)
    filt = kalman_filter(params, X)
    trace = [filt.loglik]
    converged, reason = False, "max_iter"
    for it in range(1, max_iter + 1):
        try:
            new = em_step(X, params, filt)
            new_filt = kalman_filter(new, X)
        except StabilityError as exc:
            raise EstimationError(f"EM iteration {it}: {exc}") from exc
        ll = new_filt.loglik
        if not math.isfinite(ll):
            raise EstimationError(f"non-finite log-likelihood at EM iteration {it}")
        prev = trace[-1]
        if ll < prev - 1e-6:
            converged, reason = True, "no_improvement"
            log.info("EM step %d lowered loglik by %.3g; keeping previous parameters", it, prev - ll)
            break
        params, filt = new, new_filt
        trace.append(ll)
        if abs(ll - prev) <= tol * 0.5 * (abs(ll) + abs(prev)):
            converged, reason = True, "tolerance"
            break
    if not converged:
        log.warning("EM did not converge in %d iterations (K=%d)", max_iter, K)

    params, U = identify(params)
    filt = kalman_filter(params, X)
    sm = kalman_smoother(params, filt)
    npar = n_parameters(M, K)
    aic, bic = information_criteria(filt.loglik, npar, n)
    ts = getattr(panel, "timestamps", None)
    return DFMFit(
        params=params,
        k=K,
        loglik=filt.loglik,
        aic=aic,
        bic=bic,
        n_params=npar,
        condition_number=condition_number_of(params),
        factors=sm.states,
        factor_covs=sm.covs,
        trace=tuple(trace),
        converged=converged,
        stop_reason=reason,
        n_obs=n,
        timestamps=ts,
        options={"max_iter": max_iter, "tol": tol, "seed": seed},
    )


def simulate_dfm(
    params: StateSpaceParams,
    T_obs: int,
    seed: int,
    missing_pattern: np.ndarray | None = None,
    initial_state: np.ndarray | None = None,
    start: str = "2000-01",
    return_factors: bool = False,
):
    """Draw a panel from the model; f_0 comes from the stationary law unless given."""
    if T_obs < 1:
        raise SizeError(f"T_obs must be >= 1, got {T_obs}")
    Pi = stationary_cov(params.Tmat, params.Q)
    M, K = params.Z.shape
    rng = np.random.default_rng(seed)
    f = rng.multivariate_normal(np.zeros(K), Pi, method="cholesky") if initial_state is None else np.asarray(initial_state, float)
    LQ = np.linalg.cholesky(params.Q)
    sr = np.sqrt(params.r_diag)
    eta = rng.standard_normal((T_obs, K)) @ LQ.T
    eps = rng.standard_normal((T_obs, M)) * sr
    F = np.empty((T_obs, K))
    for t in range(T_obs):
        f = params.Tmat @ f + eta[t]
        F[t] = f
    X = F @ params.Z.T + eps
    if missing_pattern is not None:
        mp = np.asarray(missing_pattern, bool)
        if mp.shape != X.shape:
            raise SizeError(f"missing pattern {mp.shape} does not match panel {X.shape}")
        X = np.where(mp, np.nan, X)
    ts = np.datetime64(start[:7], "M") + np.arange(T_obs) * MONTH
    if T_obs < 2:
        panel = X
    else:
        panel = Panel(tuple(f"x{i + 1}" for i in range(M)), ts, X, provenance={"source": "simulate_dfm", "seed": seed})
    return (panel, F) if return_factors else panel


def fit_summary_row(fit: DFMFit) -> tuple:
    return (fit.k, fit.aic, fit.bic, fit.condition_number)


__all__ = [
    "DFMFit",
    "condition_number_of",
    "em_step",
    "fit_mle",
    "identify",
    "information_criteria",
    "n_parameters",
    "pca_init",
    "simulate_dfm",
    "stability_label",
]
