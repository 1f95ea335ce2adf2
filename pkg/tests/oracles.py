"""Independent reference computations used by the tests.

Nothing here calls the recursions under test.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_discrete_lyapunov
from scipy.stats import multivariate_normal


def random_system(rng: np.random.Generator, M: int, K: int):
    Z = rng.standard_normal((M, K))
    A = rng.standard_normal((K, K))
    Tm = 0.9 * A / max(1.0, np.max(np.abs(np.linalg.eigvals(A))))
    B = rng.standard_normal((K, K))
    Q = B @ B.T + 0.2 * np.eye(K)
    R = np.diag(rng.uniform(0.2, 1.5, M))
    return Z, Tm, R, Q


def state_covariances(Tm, Q, P0, n):
    """Cov(f_t, f_s) for t, s = 1..n given f_0 ~ N(0, P0), as an (n, n, K, K) array."""
    K = Tm.shape[0]
    V = []
    P = P0
    for _ in range(n):
        P = Tm @ P @ Tm.T + Q
        V.append(P)
    C = np.zeros((n, n, K, K))
    for s in range(n):
        C[s, s] = V[s]
        for t in range(s + 1, n):
            C[t, s] = Tm @ C[t - 1, s]
            C[s, t] = C[t, s].T
    return C


def joint_moments(Z, Tm, R, Q, n, P0=None):
    """Covariance of stacked x (n*M) and cross-covariance Cov(f, x) (n*K x n*M)."""
    M, K = Z.shape
    if P0 is None:
        P0 = solve_discrete_lyapunov(Tm, Q)
    C = state_covariances(Tm, Q, P0, n)
    Sx = np.zeros((n * M, n * M))
    Cfx = np.zeros((n * K, n * M))
    for t in range(n):
        for s in range(n):
            Sx[t * M:(t + 1) * M, s * M:(s + 1) * M] = Z @ C[t, s] @ Z.T
            Cfx[t * K:(t + 1) * K, s * M:(s + 1) * M] = C[t, s] @ Z.T
        Sx[t * M:(t + 1) * M, t * M:(t + 1) * M] += R
    return Sx, Cfx, C


def stacked_loglik(Z, Tm, R, Q, X, P0=None):
    """Log-density of the observed entries of X under the joint Gaussian."""
    n, M = X.shape
    Sx, _, _ = joint_moments(Z, Tm, R, Q, n, P0)
    x = X.ravel()
    o = ~np.isnan(x)
    if not o.any():
        return 0.0
    return float(multivariate_normal(np.zeros(o.sum()), Sx[np.ix_(o, o)]).logpdf(x[o]))


def conditional_state_means(Z, Tm, R, Q, X, P0=None):
    """E[f_t | all observed x] for every t, shape (n, K)."""
    n, M = X.shape
    K = Z.shape[1]
    Sx, Cfx, _ = joint_moments(Z, Tm, R, Q, n, P0)
    x = X.ravel()
    o = ~np.isnan(x)
    if not o.any():
        return np.zeros((n, K))
    mean = Cfx[:, o] @ np.linalg.solve(Sx[np.ix_(o, o)], x[o])
    return mean.reshape(n, K)


def conditional_state_covs(Z, Tm, R, Q, X, P0=None):
    n, M = X.shape
    K = Z.shape[1]
    Sx, Cfx, C = joint_moments(Z, Tm, R, Q, n, P0)
    x = X.ravel()
    o = ~np.isnan(x)
    Cf = C.transpose(0, 2, 1, 3).reshape(n * K, n * K)
    post = Cf - Cfx[:, o] @ np.linalg.solve(Sx[np.ix_(o, o)], Cfx[:, o].T)
    return np.array([post[t * K:(t + 1) * K, t * K:(t + 1) * K] for t in range(n)])


def canonical_correlations(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Canonical correlations between the column spaces of A and B (descending)."""
    qa, _ = np.linalg.qr(A - A.mean(axis=0))
    qb, _ = np.linalg.qr(B - B.mean(axis=0))
    return np.linalg.svd(qa.T @ qb, compute_uv=False)


def multiple_correlation(y: np.ndarray, X: np.ndarray) -> float:
    """Correlation between y and its least-squares projection on [1, X]."""
    D = np.column_stack([np.ones(len(y)), X])
    fit = D @ np.linalg.lstsq(D, y, rcond=None)[0]
    return float(np.corrcoef(y, fit)[0, 1])


def newey_west_lrv_ratio(phi: float, lags: int) -> float:
    """Population Bartlett-weighted long-run variance of an AR(1), over its variance."""
    return 1 + 2 * sum((1 - j / (lags + 1)) * phi**j for j in range(1, lags + 1))
