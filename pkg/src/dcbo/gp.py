"""Gaussian-process conditioning on mixed point/integral observations."""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .kernels import (
    KernelSpec,
    NumericalError,
    ObservationOperator,
    QuadratureRule,
    cross_cov_matrix,
    disk_quadrature_nodes,
    operator_cross_cov,
)

LENGTH_SCALE_BOUNDS = (1e-3, 1.0)
NOISE_VARIANCE_BOUNDS = (1e-8, 1e-1)


@dataclass(frozen=True)
class Dataset:
    """Ordered observations (operator, value) over a box domain."""

    records: tuple[tuple[ObservationOperator, float], ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("domain bounds dimension mismatch")
        for a, b in zip(self.lo, self.hi):
            if not a < b:
                raise ValueError("domain must have positive extent")
        for op, _ in self.records:
            if op.dim != len(self.lo):
                raise ValueError("operator dimension does not match the domain")
            for c, a, b in zip(op.location, self.lo, self.hi):
                if not (a <= c <= b):
                    raise ValueError(f"operator location {op.location} outside domain")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def operators(self) -> list[ObservationOperator]:
        return [op for op, _ in self.records]

    def values(self) -> np.ndarray:
        return np.array([y for _, y in self.records], dtype=float)

    def append(self, op: ObservationOperator, y: float) -> "Dataset":
        return Dataset(self.records + ((op, float(y)),), self.lo, self.hi)


@dataclass(frozen=True)
class GPModel:
    """Kernel + noise level; observations are standardized internally when
    normalize_y is set so signal variance is expressed in data units."""

    kernel: KernelSpec
    noise_variance: float = 1e-8
    jitter: float = 1e-10
    normalize_y: bool = True

    def __post_init__(self):
        if self.noise_variance < 0.0:
            raise ValueError("noise_variance must be nonnegative")
        if self.jitter <= 0.0:
            raise ValueError("jitter must be positive")


@dataclass
class Posterior:
    """Latent-function posterior restricted to a finite grid."""

    grid: np.ndarray        # (N, d)
    mean: np.ndarray        # (N,)
    cov: np.ndarray         # (N, N), symmetric, nonnegative diagonal

    def __post_init__(self):
        self.grid = np.atleast_2d(np.asarray(self.grid, dtype=float))
        self.mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        cov = 0.5 * (cov + cov.T)
        d = np.diag(cov).copy()
        np.fill_diagonal(cov, np.maximum(d, 0.0))
        self.cov = cov
        for a in (self.grid, self.mean, self.cov):
            a.flags.writeable = False

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


@dataclass
class SampleMatrix:
    """M joint posterior draws over the posterior's grid (row per draw)."""

    values: np.ndarray  # (M, N)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.values.flags.writeable = False


def _chol_jittered(a: np.ndarray, rel_jitter: float) -> np.ndarray:
    """Cholesky with escalating jitter: bare, then j, 10j, 100j times maxdiag."""
    maxdiag = float(np.max(np.diag(a))) if a.size else 0.0
    for mult in (0.0, 1.0, 10.0, 100.0):
        try:
            return np.linalg.cholesky(a + mult * rel_jitter * maxdiag * np.eye(a.shape[0]))
        except np.linalg.LinAlgError:
            continue
    ev = np.linalg.eigvalsh(a)
    cond = abs(ev[-1]) / max(abs(ev[0]), 1e-300)
    raise NumericalError(
        f"gram matrix not positive definite after jitter escalation "
        f"(min eig {ev[0]:.3e}, cond~{cond:.3e})"
    )


def _standardization(model: GPModel, y: np.ndarray) -> tuple[float, float]:
    if not model.normalize_y or y.size == 0:
        return 0.0, 1.0
    center = float(np.mean(y))
    scale = float(np.std(y))
    if not scale > 1e-12:
        scale = 1.0
    return center, scale


def _solve_chol(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    z = np.linalg.solve(chol, b)
    return np.linalg.solve(chol.T, z)


def _data_chol(model: GPModel, data: Dataset, quad) -> np.ndarray:
    ops = data.operators()
    gram = cross_cov_matrix(model.kernel, ops, ops, quad=quad)
    gram = 0.5 * (gram + gram.T)
    gram[np.diag_indices_from(gram)] += model.noise_variance
    return _chol_jittered(gram, model.jitter)


def _point_ops(grid: np.ndarray) -> list[ObservationOperator]:
    return [ObservationOperator("point", tuple(p)) for p in np.atleast_2d(grid)]


def _as_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    return g


def fit_posterior(
    model: GPModel,
    data: Dataset,
    grid,
    quad: QuadratureRule | None = None,
) -> Posterior:
    """Posterior of the latent f on grid points given the noisy observations."""
    g = _as_grid(grid)
    gops = _point_ops(g)
    prior = cross_cov_matrix(model.kernel, gops, gops, quad=quad)
    if not data.records:
        return Posterior(g, np.zeros(len(gops)), prior)
    ops = data.operators()
    y = data.values()
    center, scale = _standardization(model, y)
    yt = (y - center) / scale
    chol = _data_chol(model, data, quad)
    kx = cross_cov_matrix(model.kernel, ops, gops, quad=quad)  # (t, N)
    alpha = _solve_chol(chol, yt)
    mean = center + scale * (kx.T @ alpha)
    v = np.linalg.solve(chol, kx)
    cov = scale * scale * (prior - v.T @ v)
    return Posterior(g, mean, cov)


def predictive_variance(
    model: GPModel,
    data: Dataset,
    candidates: list[ObservationOperator],
    quad: QuadratureRule | None = None,
) -> np.ndarray:
    """Posterior variance of each candidate observable (latent, noise-free)."""
    cands = list(candidates)
    # stationary kernels: the prior self-variance only depends on (kind, width)
    self_var = np.empty(len(cands))
    seen: dict[tuple[str, float], float] = {}
    for i, op in enumerate(cands):
        key = (op.effective_kind(), op.width)
        if key not in seen:
            seen[key] = operator_cross_cov(model.kernel, op, op, quad=quad)
        self_var[i] = seen[key]
    if not data.records:
        scale = 1.0
    else:
        y = data.values()
        _, scale = _standardization(model, y)
        chol = _data_chol(model, data, quad)
        kx = cross_cov_matrix(model.kernel, data.operators(), cands, quad=quad)
        v = np.linalg.solve(chol, kx)
        self_var = self_var - np.einsum("ij,ij->j", v, v)
    return scale * scale * np.maximum(self_var, 0.0)


def sample_posterior(post: Posterior, n_draws: int, rng: np.random.Generator) -> SampleMatrix:
    """Joint draws via Cholesky of cov (+ escalating jitter).

    A posterior with exactly zero covariance yields rows equal to the mean.
    """
    if n_draws < 2:
        raise ValueError("need at least 2 draws")
    n = post.mean.shape[0]
    if not np.any(post.cov):
        return SampleMatrix(np.tile(post.mean, (n_draws, 1)))
    chol = _chol_jittered(post.cov, 1e-10)
    z = rng.standard_normal((n_draws, n))
    return SampleMatrix(post.mean[None, :] + z @ chol.T)


def _interp_rows(values: np.ndarray, xs: np.ndarray, x_new: np.ndarray) -> np.ndarray:
    """Linear interpolation of each row of values over sorted knots xs,
    clamped to the end values outside the knot range."""
    idx = np.clip(np.searchsorted(xs, x_new) - 1, 0, len(xs) - 2)
    x0, x1 = xs[idx], xs[idx + 1]
    t = np.clip((x_new - x0) / (x1 - x0), 0.0, 1.0)
    return values[:, idx] * (1.0 - t) + values[:, idx + 1] * t


def _reflect(t: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = hi - lo
    u = np.mod(t - lo, 2.0 * span)
    return lo + np.where(u > span, 2.0 * span - u, u)


def _mesh_axes(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xs = np.unique(grid[:, 0])
    ys = np.unique(grid[:, 1])
    if len(xs) * len(ys) != grid.shape[0]:
        raise ValueError("2-D grid must be a full regular mesh")
    return xs, ys


def _bilinear_rows(values, xs, ys, px, py):
    """values rows live on the mesh raveled with x varying fastest."""
    ix = np.clip(np.searchsorted(xs, px) - 1, 0, len(xs) - 2)
    iy = np.clip(np.searchsorted(ys, py) - 1, 0, len(ys) - 2)
    tx = np.clip((px - xs[ix]) / (xs[ix + 1] - xs[ix]), 0.0, 1.0)
    ty = np.clip((py - ys[iy]) / (ys[iy + 1] - ys[iy]), 0.0, 1.0)
    nx = len(xs)

    def at(jx, jy):
        return values[:, jy * nx + jx]

    return (
        at(ix, iy) * (1 - tx) * (1 - ty)
        + at(ix + 1, iy) * tx * (1 - ty)
        + at(ix, iy + 1) * (1 - tx) * ty
        + at(ix + 1, iy + 1) * tx * ty
    )


def apply_operator_to_samples(
    samples: SampleMatrix | np.ndarray,
    grid,
    op: ObservationOperator,
) -> np.ndarray:
    """Apply an observation operator to gridded draws by discrete quadrature
    with linear interpolation between grid nodes.

    1-D draws are extended constantly beyond the grid; 2-D draws by
    reflection.  Raises if the grid is too coarse to carry the operator
    (fewer than 4 nodes in the operator's bounding box).
    """
    values = samples.values if isinstance(samples, SampleMatrix) else np.asarray(samples, dtype=float)
    g = _as_grid(grid)
    if g.shape[0] != values.shape[1]:
        raise ValueError("grid length does not match sample columns")
    kind = op.effective_kind()
    if g.shape[1] == 1:
        xs = g[:, 0]
        order = np.argsort(xs)
        xs = xs[order]
        values = values[:, order]
        q = op.location[0]
        if kind == "point":
            return _interp_rows(values, xs, np.array([q]))[:, 0]
        if kind == "interval_mean":
            w = op.width
            a, b = q - 0.5 * w, q + 0.5 * w
            if np.count_nonzero((xs >= a) & (xs <= b)) < 4:
                raise ValueError("grid too coarse for the requested width")
            knots = np.concatenate([[a], xs[(xs > a) & (xs < b)], [b]])
            fv = _interp_rows(values, xs, knots)
            return np.trapezoid(fv, knots, axis=1) / w
        if kind == "smoothed_gradient":
            w = op.width
            a, b = q - 6.0 * w, q + 6.0 * w
            if np.count_nonzero((xs >= q - 2 * w) & (xs <= q + 2 * w)) < 4:
                raise ValueError("grid too coarse for the requested width")
            knots = np.concatenate([[a], xs[(xs > a) & (xs < b)], [b]])
            fv = _interp_rows(values, xs, knots)
            rho = (knots - q) / w**2 * np.exp(-0.5 * ((knots - q) / w) ** 2) / (
                w * math.sqrt(2.0 * math.pi)
            )
            return np.trapezoid(fv * rho[None, :], knots, axis=1)
        raise ValueError(f"operator kind {op.kind} is one-dimensional only")
    if g.shape[1] == 2:
        if kind == "point":
            xs, ys = _mesh_axes(g)
            return _bilinear_rows(values, xs, ys, np.array([op.location[0]]),
                                  np.array([op.location[1]]))[:, 0]
        if kind == "disk_mean":
            xs, ys = _mesh_axes(g)
            r, (cx, cy) = op.width, op.location
            in_box = (np.abs(g[:, 0] - cx) <= r) & (np.abs(g[:, 1] - cy) <= r)
            if np.count_nonzero(in_box) < 4:
                raise ValueError("grid too coarse for the requested width")
            rule = disk_quadrature_nodes(r, (cx, cy), degree=12, convention="mean")
            pts = np.array(rule.points)
            wts = np.array(rule.weights)
            px = _reflect(pts[:, 0], xs[0], xs[-1])
            py = _reflect(pts[:, 1], ys[0], ys[-1])
            fv = _bilinear_rows(values, xs, ys, px, py)
            return fv @ wts
        raise ValueError(f"operator kind {op.kind} is two-dimensional only")
    raise ValueError("only 1-D and 2-D grids are supported")


def loo_objective(model: GPModel, data: Dataset, quad: QuadratureRule | None = None) -> float:
    """Summed log leave-one-out predictive density (closed form from the
    inverse gram; Rasmussen & Williams eq. 5.10-5.12)."""
    if len(data.records) < 2:
        raise ValueError("leave-one-out requires at least 2 observations")
    y = data.values()
    center, scale = _standardization(model, y)
    yt = (y - center) / scale
    chol = _data_chol(model, data, quad)
    n = len(yt)
    kinv = _solve_chol(chol, np.eye(n))
    alpha = _solve_chol(chol, yt)
    kinv_diag = np.diag(kinv)
    if np.any(kinv_diag <= 0.0):
        raise NumericalError("nonpositive diagonal in inverse gram")
    var = 1.0 / kinv_diag
    res2 = (alpha * var) ** 2
    return float(np.sum(-0.5 * np.log(2.0 * math.pi * var) - 0.5 * res2 / var))


def _latin_hypercube(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    u = np.empty((n, d))
    for j in range(d):
        u[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return u


def optimize_hypers(
    model: GPModel,
    data: Dataset,
    rng: np.random.Generator,
    budget: int = 20,
    quad: QuadratureRule | None = None,
) -> GPModel:
    """Search (length scale, noise variance) by LOO log predictive density.

    Exactly `budget` candidates drawn by log-space Latin hypercube are scored
    against the incoming model; the best scorer wins and the incoming model
    is never replaced by a worse one.  If every candidate fails numerically
    the incoming model is returned with a warning.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if model.kernel.family == "sum":
        raise ValueError("hyperparameter search supports single-family kernels")
    if len(data.records) < 2:
        return model

    def score(m: GPModel) -> float:
        try:
            return loo_objective(m, data, quad=quad)
        except (NumericalError, FloatingPointError):
            return -np.inf

    best_model = model
    best = score(model)
    u = _latin_hypercube(rng, budget, 2)
    lell = np.log10(LENGTH_SCALE_BOUNDS)
    lnoise = np.log10(NOISE_VARIANCE_BOUNDS)
    any_ok = np.isfinite(best)
    for i in range(budget):
        ell = 10.0 ** (lell[0] + u[i, 0] * (lell[1] - lell[0]))
        nv = 10.0 ** (lnoise[0] + u[i, 1] * (lnoise[1] - lnoise[0]))
        cand = dataclasses.replace(
            model,
            kernel=dataclasses.replace(model.kernel, length_scale=float(ell)),
            noise_variance=float(nv),
        )
        s = score(cand)
        if np.isfinite(s):
            any_ok = True
        if s > best:
            best, best_model = s, cand
    if not any_ok:
        warnings.warn("all hyperparameter candidates failed numerically; keeping incoming model")
    return best_model
