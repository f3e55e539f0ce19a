"""Sample dependence measures between paired multivariate samples."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import digamma

_DITHER = 1e-10


def _as_rows(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError("samples must be 1-D or 2-D arrays")
    return a


def _centered_alpha_distances(a: np.ndarray, alpha: float) -> np.ndarray:
    d = cdist(a, a)
    if alpha != 1.0:
        d = d**alpha
    mu_rows = d.mean(axis=1, keepdims=True)
    mu_cols = d.mean(axis=0, keepdims=True)
    return d - mu_rows - mu_cols + d.mean()


def dist_cov(x, y, alpha: float = 1.0) -> float:
    """Sample distance covariance (V-statistic) with exponent alpha in (0, 2)."""
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    xa, ya = _as_rows(x), _as_rows(y)
    if xa.shape[0] != ya.shape[0]:
        raise ValueError("x and y must have the same number of rows")
    if xa.shape[0] < 2:
        raise ValueError("need at least 2 paired samples")
    a = _centered_alpha_distances(xa, alpha)
    b = _centered_alpha_distances(ya, alpha)
    v2 = float(np.mean(a * b))
    return np.sqrt(max(v2, 0.0))


def dist_cor(x, y, alpha: float = 1.0) -> float:
    """Sample distance correlation in [0, 1]; degenerate marginals give 0."""
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    xa, ya = _as_rows(x), _as_rows(y)
    if xa.shape[0] != ya.shape[0]:
        raise ValueError("x and y must have the same number of rows")
    if xa.shape[0] < 2:
        raise ValueError("need at least 2 paired samples")
    a = _centered_alpha_distances(xa, alpha)
    b = _centered_alpha_distances(ya, alpha)
    vxy = max(float(np.mean(a * b)), 0.0)
    vx = float(np.mean(a * a))
    vy = float(np.mean(b * b))
    if vx <= 0.0 or vy <= 0.0:
        return 0.0
    r2 = vxy / np.sqrt(vx * vy)
    return float(np.sqrt(min(max(r2, 0.0), 1.0)))


def mi_knn(x, y, k: int = 3) -> float:
    """Kraskov-Stoegbauer-Grassberger (variant 1) mutual information estimate.

    Ties are broken by adding fixed-seed noise of amplitude 1e-10, so the
    estimate is deterministic for given inputs.  Chebyshev metric throughout.
    """
    xa, ya = _as_rows(x), _as_rows(y)
    if xa.shape[0] != ya.shape[0]:
        raise ValueError("x and y must have the same number of rows")
    m = xa.shape[0]
    if not 1 <= k < m:
        raise ValueError("k must satisfy 1 <= k < number of samples")
    rng = np.random.default_rng(0)
    xa = xa + _DITHER * rng.standard_normal(xa.shape)
    ya = ya + _DITHER * rng.standard_normal(ya.shape)
    joint = np.hstack([xa, ya])
    eps = cKDTree(joint).query(joint, k=k + 1, p=np.inf)[0][:, -1]
    # strict inequality: count neighbours at marginal distance < eps_i
    r = np.nextafter(eps, 0.0)
    nx = cKDTree(xa).query_ball_point(xa, r, p=np.inf, return_length=True) - 1
    ny = cKDTree(ya).query_ball_point(ya, r, p=np.inf, return_length=True) - 1
    return float(
        digamma(k) + digamma(m) - np.mean(digamma(nx + 1) + digamma(ny + 1))
    )
