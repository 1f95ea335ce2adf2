"""Linear-Gaussian state space for the factor model.

    x_t = Z f_t + e_t,        e_t ~ N(0, R),  R diagonal
    f_t = Tmat f_{t-1} + u_t, u_t ~ N(0, Q)

The recursion starts from f_0 ~ N(a0, P0); by default a0 = 0 and P0 is the
stationary covariance, so observation t = 1 is predicted from f_0.
Missing observations (NaN) are dropped row-wise at each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .errors import ConsistencyError, FilterError, ParameterError, SizeError, StabilityError

LOG_2PI = math.log(2 * math.pi)
MAX_COND = 1e12


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.swapaxes(-1, -2))


def spectral_radius(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0


def stationary_cov(Tmat: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve Pi = Tmat Pi Tmat' + Q."""
    rho = spectral_radius(Tmat)
    if rho >= 1:
        raise StabilityError(f"transition matrix has spectral radius {rho:.6g} >= 1")
    return _sym(solve_discrete_lyapunov(Tmat, Q))


@dataclass(frozen=True, eq=False)
class StateSpaceParams:
    Z: np.ndarray
    Tmat: np.ndarray
    R: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        Z = np.atleast_2d(np.array(self.Z, float))
        Tm = np.atleast_2d(np.array(self.Tmat, float))
        R = np.atleast_2d(np.array(self.R, float))
        Q = np.atleast_2d(np.array(self.Q, float))
        M, K = Z.shape
        if Tm.shape != (K, K) or Q.shape != (K, K) or R.shape != (M, M):
            raise SizeError(f"inconsistent shapes Z{Z.shape} T{Tm.shape} R{R.shape} Q{Q.shape}")
        if np.any(R != np.diag(np.diag(R))) or np.any(np.diag(R) <= 0):
            raise ParameterError("R must be diagonal with positive entries")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12) or np.linalg.eigvalsh(_sym(Q)).min() <= 0:
            raise ParameterError("Q must be symmetric positive definite")
        rho = spectral_radius(Tm)
        if rho >= 1:
            raise StabilityError(f"transition matrix has spectral radius {rho:.6g} >= 1")
        for name, a in (("Z", Z), ("Tmat", Tm), ("R", R), ("Q", _sym(Q))):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_series(self) -> int:
        return self.Z.shape[0]

    @property
    def n_factors(self) -> int:
        return self.Z.shape[1]

    @property
    def r_diag(self) -> np.ndarray:
        return np.diag(self.R)

    def stationary_cov(self) -> np.ndarray:
        return stationary_cov(self.Tmat, self.Q)

    def implied_cov(self) -> np.ndarray:
        """Unconditional covariance of x_t: Z Pi Z' + R."""
        return _sym(self.Z @ self.stationary_cov() @ self.Z.T + self.R)

    def rotate(self, U: np.ndarray) -> "StateSpaceParams":
        """Parameters for factors g_t = U f_t, U orthogonal."""
        return StateSpaceParams(self.Z @ U.T, U @ self.Tmat @ U.T, self.R, U @ self.Q @ U.T)

    def to_dict(self) -> dict:
        def mat(a):
            return {"rows": a.shape[0], "cols": a.shape[1], "data": [float(v) for v in a.ravel()]}

        return {"Z": mat(self.Z), "Tmat": mat(self.Tmat), "R": mat(self.R), "Q": mat(self.Q)}

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpaceParams":
        def mat(m):
            return np.array(m["data"], float).reshape(m["rows"], m["cols"])

        return cls(mat(d["Z"]), mat(d["Tmat"]), mat(d["R"]), mat(d["Q"]))


@dataclass(frozen=True, eq=False)
class FilterOutput:
    """Per-period filter quantities. Arrays are indexed by t = 0..T_obs-1.

    ``innovations``, ``innovation_covs`` and ``gains`` are lists because their
    dimension is the number of series observed at t.
    """

    a_pred: np.ndarray
    P_pred: np.ndarray
    a_filt: np.ndarray
    P_filt: np.ndarray
    innovations: list
    innovation_covs: list
    gains: list
    observed: np.ndarray
    loglik: float
    a0: np.ndarray
    P0: np.ndarray
    params: StateSpaceParams

    @property
    def n_obs(self) -> int:
        return self.a_filt.shape[0]


def _as_matrix(data) -> np.ndarray:
    vals = getattr(data, "values", data)
    return np.atleast_2d(np.asarray(vals, float))


def kalman_filter(
    params: StateSpaceParams,
    data,
    a0: np.ndarray | None = None,
    P0: np.ndarray | None = None,
    mask: np.ndarray | None = None,
) -> FilterOutput:
    """Run the filter over a Panel or a T x M array (NaN = missing).

    ``mask`` marks additional entries to treat as missing.
    """
    X = _as_matrix(data)
    Z, Tm, Q = params.Z, params.Tmat, params.Q
    r = params.r_diag
    M, K = Z.shape
    if X.shape[1] != M:
        raise SizeError(f"data has {X.shape[1]} columns, loadings have {M} rows")
    n = X.shape[0]
    observed = ~np.isnan(X)
    if mask is not None:
        observed &= ~np.asarray(mask, bool)
    a = np.zeros(K) if a0 is None else np.asarray(a0, float).copy()
    P = params.stationary_cov() if P0 is None else np.asarray(P0, float).copy()
    a_init, P_init = a.copy(), P.copy()

    a_pred = np.empty((n, K))
    P_pred = np.empty((n, K, K))
    a_filt = np.empty((n, K))
    P_filt = np.empty((n, K, K))
    vs, Ss, Ks = [], [], []
    ll = 0.0
    for t in range(n):
        a = Tm @ a
        P = Tm @ P @ Tm.T + Q
        P = 0.5 * (P + P.T)
        a_pred[t], P_pred[t] = a, P
        o = observed[t]
        m = int(o.sum())
        if m == 0:
            vs.append(np.empty(0))
            Ss.append(np.empty((0, 0)))
            Ks.append(np.empty((K, 0)))
        else:
            if m == M:
                Zo, ro, xo = Z, r, X[t]
            else:
                Zo, ro, xo = Z[o], r[o], X[t, o]
            v = xo - Zo @ a
            PZ = P @ Zo.T
            S = Zo @ PZ + np.diag(ro)
            S = 0.5 * (S + S.T)
            w, V = np.linalg.eigh(S)
            if w[0] <= 0 or w[-1] > MAX_COND * w[0]:
                raise FilterError(f"innovation covariance is numerically singular at t={t}")
            Vw = V / w
            Sinv = Vw @ V.T
            Kg = PZ @ Sinv
            a = a + Kg @ v
            P = P - Kg @ S @ Kg.T
            P = 0.5 * (P + P.T)
            Vv = V.T @ v
            ll -= 0.5 * (np.log(w).sum() + Vv @ (Vv / w) + m * LOG_2PI)
            vs.append(v)
            Ss.append(S)
            Ks.append(Kg)
        a_filt[t], P_filt[t] = a, P
    if not math.isfinite(ll):
        raise FilterError("log-likelihood is not finite")
    return FilterOutput(a_pred, P_pred, a_filt, P_filt, vs, Ss, Ks, observed, float(ll), a_init, P_init, params)


@dataclass(frozen=True, eq=False)
class SmootherOutput:
    """Smoothed moments for t = 0..T_obs-1 and for the initial state f_0.

    ``lag_cov[t]`` is Cov(f_t, f_{t-1} | all data); for t = 0 the lagged
    state is f_0.
    """

    states: np.ndarray
    covs: np.ndarray
    lag_cov: np.ndarray
    initial_state: np.ndarray
    initial_cov: np.ndarray


def kalman_smoother(params: StateSpaceParams, filt: FilterOutput) -> SmootherOutput:
    """Fixed-interval (Rauch-Tung-Striebel) smoother."""
    if filt.params is not params and not all(
        np.array_equal(getattr(filt.params, k), getattr(params, k)) for k in ("Z", "Tmat", "R", "Q")
    ):
        raise ConsistencyError("filter output was produced with different parameters")
    Tm = params.Tmat
    n, K = filt.a_filt.shape
    a_s = np.empty((n, K))
    P_s = np.empty((n, K, K))
    lag = np.empty((n, K, K))
    a_s[-1], P_s[-1] = filt.a_filt[-1], filt.P_filt[-1]
    for t in range(n - 2, -2, -1):
        if t >= 0:
            a_t, P_t = filt.a_filt[t], filt.P_filt[t]
        else:
            a_t, P_t = filt.a0, filt.P0
        Pp = filt.P_pred[t + 1]
        J = np.linalg.solve(Pp, Tm @ P_t).T  # P_t Tm' Pp^{-1}, Pp symmetric
        a_new = a_t + J @ (a_s[t + 1] - filt.a_pred[t + 1])
        P_new = P_t + J @ (P_s[t + 1] - Pp) @ J.T
        lag[t + 1] = P_s[t + 1] @ J.T
        if t >= 0:
            a_s[t], P_s[t] = a_new, _sym(P_new)
        else:
            a_init, P_init = a_new, _sym(P_new)
    return SmootherOutput(a_s, P_s, lag, a_init, P_init)
