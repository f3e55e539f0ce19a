"""Stationary kernels, observation operators, and integrated covariances.

Covariances between integral observations (interval means, Gaussian-smoothed
derivatives, disk means) and the latent function are computed by reducing the
double integrals to one-dimensional integrals of the kernel's radial profile.
For Matern kernels the interval reductions use exact antiderivatives; the
remaining paths use composite Gauss-Legendre panels sized by the kernel
length scale, so accuracy does not degrade when an operator is much wider
than the correlation length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import ndtr, roots_legendre

KERNEL_FAMILIES = ("matern52", "matern32", "rq", "sum")
OPERATOR_KINDS = ("point", "interval_mean", "smoothed_gradient", "disk_mean")

_SQRT5 = math.sqrt(5.0)
_SQRT3 = math.sqrt(3.0)
# Relative tail threshold: beyond this many length scales an exponentially
# decaying kernel contributes < 1e-12 of its mass.
_MATERN_TAIL = 20.0
_GAUSS_TAIL = 7.5


class NumericalError(RuntimeError):
    """Raised when a linear-algebra or quadrature step cannot be completed."""


@dataclass(frozen=True)
class KernelSpec:
    """Stationary covariance description.

    family is one of 'matern52', 'matern32', 'rq', 'sum'.  For 'sum' the
    children tuple holds the summands and the remaining fields are ignored.
    rq_mixture is the rational-quadratic mixture exponent (alpha > 0).
    """

    family: str
    length_scale: float = 1.0
    signal_variance: float = 1.0
    rq_mixture: float = 1.0
    children: tuple["KernelSpec", ...] = ()

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "sum":
            if len(self.children) < 2:
                raise ValueError("sum kernel needs at least two children")
            for c in self.children:
                if c.family == "sum":
                    raise ValueError("nested sum kernels are not supported")
        else:
            if self.children:
                raise ValueError("children only allowed for family='sum'")
            if not (self.length_scale > 0.0):
                raise ValueError("length_scale must be positive")
            if not (self.signal_variance > 0.0):
                raise ValueError("signal_variance must be positive")
            if self.family == "rq" and not (self.rq_mixture > 0.0):
                raise ValueError("rq_mixture must be positive")

    def terms(self) -> tuple["KernelSpec", ...]:
        return self.children if self.family == "sum" else (self,)

    def min_length_scale(self) -> float:
        return min(t.length_scale for t in self.terms())


@dataclass(frozen=True)
class ObservationOperator:
    """A linear observable of the latent function.

    kind 'point': f(location).
    kind 'interval_mean': mean of f over [q - w/2, q + w/2] (1-D).
    kind 'smoothed_gradient': d/dq of the Gaussian-smoothed field, i.e.
        d/dq int f(x) N(x; q, w^2) dx (1-D, w > 0).
    kind 'disk_mean': mean of f over the disk of radius w at location (2-D).
    """

    kind: str
    location: tuple[float, ...]
    width: float = 0.0

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if not isinstance(self.location, tuple):
            object.__setattr__(self, "location", tuple(float(v) for v in self.location))
        if self.width < 0.0:
            raise ValueError("width must be nonnegative")
        if self.kind == "point" and self.width != 0.0:
            raise ValueError("point operator must have width 0")
        if self.kind == "smoothed_gradient" and self.width <= 0.0:
            raise ValueError("smoothed_gradient requires width > 0")
        dim = len(self.location)
        if self.kind in ("interval_mean", "smoothed_gradient") and dim != 1:
            raise ValueError(f"{self.kind} is one-dimensional")
        if self.kind == "disk_mean" and dim != 2:
            raise ValueError("disk_mean is two-dimensional")

    @property
    def dim(self) -> int:
        return len(self.location)

    def effective_kind(self) -> str:
        """Width-zero interval and disk operators act as point evaluations."""
        if self.width == 0.0 and self.kind in ("interval_mean", "disk_mean"):
            return "point"
        return self.kind


@dataclass(frozen=True)
class QuadratureRule:
    """Node/weight set plus the order knob used by the covariance integrals.

    kind 'interval': order = Gauss-Legendre nodes per panel (default 32);
    nodes are the reference rule on [-1, 1].
    kind 'disk': order = polynomial exactness degree; nodes are concrete
    2-D points with weights in the requested convention.
    """

    kind: str
    order: int
    points: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("interval", "disk"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must have equal length")


def interval_rule(n_nodes: int = 32) -> QuadratureRule:
    """Reference Gauss-Legendre rule on [-1, 1] with n_nodes points."""
    x, w = roots_legendre(int(n_nodes))
    return QuadratureRule(
        kind="interval",
        order=int(n_nodes),
        points=tuple((float(v),) for v in x),
        weights=tuple(float(v) for v in w),
    )


def disk_quadrature_nodes(
    radius: float,
    center: tuple[float, float] = (0.0, 0.0),
    degree: int = 20,
    convention: str = "mean",
) -> QuadratureRule:
    """Cubature over a disk, exact for bivariate polynomials up to `degree`.

    Chords parallel to the y axis are placed at the zeros of the Chebyshev
    polynomial of the second kind (the Gaussian rule for the weight
    sqrt(1 - x^2)), and each chord is integrated with a Gauss-Legendre rule;
    the combination is exact for total degree 2m - 1 with m chords.
    Weights sum to 1 ('mean' convention) or to pi r^2 ('raw').
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if convention not in ("mean", "raw"):
        raise ValueError("convention must be 'mean' or 'raw'")
    m = (int(degree) + 2) // 2  # 2m - 1 >= degree
    k = np.arange(1, m + 1)
    theta = k * math.pi / (m + 1)
    eta = np.cos(theta)            # chord abscissae on the unit disk
    s = np.sin(theta)              # chord half-lengths
    glx, glw = roots_legendre(m)
    cx, cy = float(center[0]), float(center[1])
    px = cx + radius * np.repeat(eta, m)
    py = cy + radius * (s[:, None] * glx[None, :]).ravel()
    w = (math.pi / (m + 1)) * (s[:, None] ** 2 * glw[None, :]).ravel()
    w = w * radius * radius        # raw convention: sums to pi r^2
    if convention == "mean":
        w = w / (math.pi * radius * radius)
    return QuadratureRule(
        kind="disk",
        order=int(degree),
        points=tuple((float(a), float(b)) for a, b in zip(px, py)),
        weights=tuple(float(v) for v in w),
    )


# ---------------------------------------------------------------------------
# radial profile and its antiderivatives
# ---------------------------------------------------------------------------

def _term_kappa(t: KernelSpec, u):
    """kappa(u) for a non-sum term, u >= 0 arraylike."""
    u = np.asarray(u, dtype=float)
    s2, ell = t.signal_variance, t.length_scale
    if t.family == "matern52":
        a = _SQRT5 / ell
        au = a * u
        return s2 * (1.0 + au + au * au / 3.0) * np.exp(-au)
    if t.family == "matern32":
        b = _SQRT3 / ell
        bu = b * u
        return s2 * (1.0 + bu) * np.exp(-bu)
    if t.family == "rq":
        al = t.rq_mixture
        return s2 * np.power(1.0 + u * u / (2.0 * al * ell * ell), -al)
    raise ValueError(t.family)


def _term_kappa_prime(t: KernelSpec, u):
    """d kappa / du for u > 0 (odd-extended for u < 0)."""
    u = np.asarray(u, dtype=float)
    au_abs = np.abs(u)
    s2, ell = t.signal_variance, t.length_scale
    if t.family == "matern52":
        a = _SQRT5 / ell
        mag = s2 * (a * a * au_abs / 3.0) * (1.0 + a * au_abs) * np.exp(-a * au_abs)
    elif t.family == "matern32":
        b = _SQRT3 / ell
        mag = s2 * b * b * au_abs * np.exp(-b * au_abs)
    elif t.family == "rq":
        al = t.rq_mixture
        mag = s2 * (au_abs / (ell * ell)) * np.power(
            1.0 + u * u / (2.0 * al * ell * ell), -al - 1.0
        )
    else:
        raise ValueError(t.family)
    return -np.sign(u) * mag


def _term_k1(t: KernelSpec, u):
    """K1(u) = int_0^u kappa, odd in u.  Closed form for Matern, spline for RQ."""
    u = np.asarray(u, dtype=float)
    x = np.abs(u)
    s2, ell = t.signal_variance, t.length_scale
    if t.family == "matern52":
        a = _SQRT5 / ell
        val = s2 * (8.0 / (3.0 * a) - np.exp(-a * x) * (8.0 / (3.0 * a) + 5.0 * x / 3.0 + a * x * x / 3.0))
    elif t.family == "matern32":
        b = _SQRT3 / ell
        val = s2 * (2.0 / b - np.exp(-b * x) * (x + 2.0 / b))
    elif t.family == "rq":
        val = _rq_k1_spline(t, float(np.max(x)) if x.size else 1.0)(x)
    else:
        raise ValueError(t.family)
    return np.sign(u) * val


def _term_k2(t: KernelSpec, u):
    """K2(u) = int_0^u K1, even in u."""
    u = np.asarray(u, dtype=float)
    x = np.abs(u)
    s2, ell = t.signal_variance, t.length_scale
    if t.family == "matern52":
        a = _SQRT5 / ell
        return s2 * (8.0 * x / (3.0 * a) - 5.0 / (a * a)
                     + np.exp(-a * x) * (5.0 / (a * a) + 7.0 * x / (3.0 * a) + x * x / 3.0))
    if t.family == "matern32":
        b = _SQRT3 / ell
        return s2 * (2.0 * x / b - 3.0 / (b * b) + np.exp(-b * x) * (x / b + 3.0 / (b * b)))
    if t.family == "rq":
        return _rq_k1_spline(t, float(np.max(x)) if x.size else 1.0).antiderivative()(x)
    raise ValueError(t.family)


def _term_ks1(t: KernelSpec, u):
    """Ks1(u) = int_0^u s * kappa(s) ds (closed form; used by disk reductions)."""
    u = np.asarray(u, dtype=float)
    x = np.abs(u)
    s2, ell = t.signal_variance, t.length_scale
    if t.family == "matern52":
        a = _SQRT5 / ell
        return s2 * (5.0 / (a * a) - np.exp(-a * x) * (a * x**3 / 3.0 + 2.0 * x * x + 5.0 * x / a + 5.0 / (a * a)))
    if t.family == "matern32":
        b = _SQRT3 / ell
        return s2 * (3.0 / (b * b) - np.exp(-b * x) * (x * x + 3.0 * x / b + 3.0 / (b * b)))
    if t.family == "rq":
        al = t.rq_mixture
        z = x * x / (2.0 * al * ell * ell)
        if abs(al - 1.0) < 1e-12:
            return s2 * ell * ell * np.log1p(z)
        return s2 * (al * ell * ell / (1.0 - al)) * (np.power(1.0 + z, 1.0 - al) - 1.0)
    raise ValueError(t.family)


@lru_cache(maxsize=64)
def _rq_k1_cached(t: KernelSpec, umax_key: float, density: int) -> CubicSpline:
    ell = t.length_scale
    umax = umax_key
    # knots dense on the scale of ell near zero, coarsening into the tail
    edges = [0.0]
    h = ell / (2.0 * density)
    while edges[-1] < umax:
        edges.append(min(edges[-1] + h, umax))
        if edges[-1] > 10.0 * ell:
            h = min(h * 1.05, ell)
    grid = np.array(edges)
    glx, glw = roots_legendre(16)
    mid = 0.5 * (grid[1:] + grid[:-1])
    half = 0.5 * (grid[1:] - grid[:-1])
    pts = mid[:, None] + half[:, None] * glx[None, :]
    vals = (_term_kappa(t, pts) * glw[None, :]).sum(axis=1) * half
    k1 = np.concatenate([[0.0], np.cumsum(vals)])
    return CubicSpline(grid, k1)


def _rq_k1_spline(t: KernelSpec, umax: float) -> CubicSpline:
    # round the table extent up so repeated calls share one cache entry
    umax_key = max(1.0, 2.0 ** math.ceil(math.log2(max(umax, 1e-9) + 1e-12)))
    return _rq_k1_cached(t, umax_key, 8)


def _sum_over_terms(fn, spec: KernelSpec, u):
    out = None
    for t in spec.terms():
        v = fn(t, u)
        out = v if out is None else out + v
    return out


def kappa(spec: KernelSpec, u):
    """Radial profile: eval_kernel at distance |u|."""
    return _sum_over_terms(_term_kappa, spec, np.abs(u))


def kappa_prime(spec: KernelSpec, u):
    return _sum_over_terms(_term_kappa_prime, spec, u)


def k1(spec: KernelSpec, u):
    return _sum_over_terms(_term_k1, spec, u)


def k2(spec: KernelSpec, u):
    return _sum_over_terms(_term_k2, spec, u)


def ks1(spec: KernelSpec, u):
    return _sum_over_terms(_term_ks1, spec, u)


def _tail_length(spec: KernelSpec) -> float:
    """Distance beyond which kappa' is negligible (relative 1e-12)."""
    out = 0.0
    for t in spec.terms():
        if t.family in ("matern52", "matern32"):
            out = max(out, _MATERN_TAIL * t.length_scale)
        else:
            # power-law tail: |kappa'| ~ u^-(2 alpha + 1)
            al = t.rq_mixture
            out = max(out, t.length_scale * 10.0 ** (12.0 / (2.0 * al + 1.0)))
    return out


def eval_kernel(spec: KernelSpec, x1, x2):
    """k(x1, x2) for points of equal dimension; broadcasts over leading axes."""
    a = np.atleast_1d(np.asarray(x1, dtype=float))
    b = np.atleast_1d(np.asarray(x2, dtype=float))
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("points must share dimension")
    d = np.sqrt(np.sum((a - b) ** 2, axis=-1))
    out = kappa(spec, d)
    return float(out) if np.isscalar(d) or d.ndim == 0 else out


# ---------------------------------------------------------------------------
# Gauss-Legendre panel machinery
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _gl(n: int):
    x, w = roots_legendre(n)
    return x, w


@lru_cache(maxsize=4096)
def _panel_nodes(lo: float, hi: float, kinks: tuple[float, ...], scale: float, order: int):
    """Composite GL nodes on [lo, hi], split at kinks, panels <= scale wide."""
    if hi <= lo:
        return np.empty(0), np.empty(0)
    cuts = [lo] + [c for c in sorted(set(kinks)) if lo < c < hi] + [hi]
    glx, glw = _gl(order)
    xs, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n_pan = min(max(1, math.ceil((b - a) / max(scale, 1e-300))), 256)
        edges = np.linspace(a, b, n_pan + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        xs.append((mid[:, None] + half[:, None] * glx[None, :]).ravel())
        ws.append((half[:, None] * glw[None, :]).ravel())
    return np.concatenate(xs), np.concatenate(ws)


# ---------------------------------------------------------------------------
# one-dimensional pair covariances, vectorized over the separation delta
# ---------------------------------------------------------------------------

def _cov_interval_point(spec, delta, w):
    """Cov(interval mean of width w at q, point at x), delta = q - x."""
    d = np.asarray(delta, dtype=float)
    if w == 0.0:
        return kappa(spec, d)
    return (k1(spec, d + 0.5 * w) - k1(spec, d - 0.5 * w)) / w


def _cov_interval_interval(spec, delta, wa, wb):
    if wa == 0.0 and wb == 0.0:
        return kappa(spec, np.asarray(delta, dtype=float))
    if wa == 0.0:
        return _cov_interval_point(spec, -np.asarray(delta, dtype=float), wb)
    if wb == 0.0:
        return _cov_interval_point(spec, np.asarray(delta, dtype=float), wa)
    d = np.asarray(delta, dtype=float)
    s = 0.5 * (wa + wb)
    r = 0.5 * abs(wa - wb)
    num = k2(spec, d + s) + k2(spec, d - s) - k2(spec, d + r) - k2(spec, d - r)
    return num / (wa * wb)


def _phi(t, sd):
    return np.exp(-0.5 * (t / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))


def _phi_prime(t, sd):
    return -(t / (sd * sd)) * _phi(t, sd)


def _smoothed_box(t, sd, w):
    """(Gaussian(sd) convolved with the unit-mass box of width w)(t)."""
    if w == 0.0:
        return _phi(t, sd)
    return (ndtr((t + 0.5 * w) / sd) - ndtr((t - 0.5 * w) / sd)) / w


@lru_cache(maxsize=256)
def _kprime_nodes(spec: KernelSpec, scale_key: float, order: int):
    """Nodes/weights of w(u) = kappa'(u) on its support, kink at 0."""
    tail = _tail_length(spec)
    xs, ws = _panel_nodes(-tail, tail, (0.0,), scale_key, order)
    return xs, ws * kappa_prime(spec, xs)


def _grad_weight_quad(spec, delta, other_weight, other_support, other_scale, order=16):
    """int kappa'(u) W(delta - u) du, choosing nodes on the narrower factor.

    W is the weight the non-gradient side contributes (a Gaussian density,
    its derivative, or a Gaussian-smoothed box).  Node sets are independent
    of delta so the evaluation vectorizes over separation matrices.
    """
    d = np.asarray(delta, dtype=float)
    scale = min(spec.min_length_scale(), other_scale) / 2.0
    tail = _tail_length(spec)
    if tail <= 2.0 * other_support:
        u, wu = _kprime_nodes(spec, scale, order)
        return np.tensordot(other_weight(d[..., None] - u), wu, axes=([-1], [0]))
    # wide kernel: put the nodes on W's (compact) support instead
    v, wv = _panel_nodes(-other_support, other_support, (0.0,), scale, order)
    wv = wv * other_weight(v)
    return np.tensordot(kappa_prime(spec, d[..., None] - v), wv, axes=([-1], [0]))


def _cov_grad_point(spec, delta, w):
    """Cov(smoothed gradient(q, w), point(x)), delta = q - x."""
    return _grad_weight_quad(spec, delta, lambda t: _phi(t, w), _GAUSS_TAIL * w, w)


def _cov_grad_grad(spec, delta, wa, wb):
    s = math.hypot(wa, wb)
    return -_grad_weight_quad(spec, delta, lambda t: _phi_prime(t, s), _GAUSS_TAIL * s, s)


def _cov_grad_interval(spec, delta, wg, wi):
    """Cov(smoothed gradient(qa, wg), interval mean(qb, wi)), delta = qa - qb."""
    support = _GAUSS_TAIL * wg + 0.5 * wi
    return _grad_weight_quad(
        spec, delta, lambda t: _smoothed_box(t, wg, wi), support, wg
    )


def gaussian_smooth_point_cov(spec: KernelSpec, q: float, w: float, x: float) -> float:
    """Cov of the (non-differentiated) Gaussian-smoothed field at q with f(x).

    The smoothed-gradient covariance is the q-derivative of this quantity;
    exposed so the relationship can be checked by finite differences.
    """
    d = np.asarray(q - x, dtype=float)
    scale = min(spec.min_length_scale(), w) / 2.0
    tail = _tail_length(spec)
    if tail <= 2.0 * _GAUSS_TAIL * w:
        u, wu = _panel_nodes(-tail, tail, (0.0,), scale, 16)
        return float(np.sum(kappa(spec, u) * _phi(d - u, w) * wu))
    v, wv = _panel_nodes(-_GAUSS_TAIL * w, _GAUSS_TAIL * w, (0.0,), scale, 16)
    return float(np.sum(kappa(spec, d - v) * _phi(v, w) * wv))


# ---------------------------------------------------------------------------
# disk reductions (2-D isotropic)
# ---------------------------------------------------------------------------

def _arc_angle(s, rho, r):
    """Angular measure of the circle of radius s about a point at distance
    rho from a disk center that lies inside the disk of radius r."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (s * s + rho * rho - r * r) / (2.0 * s * rho)
    z = np.where(np.isfinite(z), z, -1.0)
    return 2.0 * np.arccos(np.clip(z, -1.0, 1.0))


@lru_cache(maxsize=8)
def _sqrt_graded_unit_nodes(order: int, levels: int):
    """Nodes on [0, 1] with geometric grading into both endpoints.

    Handles the sqrt-type derivative blowup of the arc angle at tangency.
    """
    glx, glw = _gl(order)
    left = [0.0] + [0.5 ** k for k in range(levels + 1, 1, -1)]
    edges = np.array(left + [1.0 - e for e in reversed(left[:-1])])
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + half[:, None] * glx[None, :]).ravel(), (
        half[:, None] * glw[None, :]
    ).ravel()


def _disk_point_profile(radial_fn, radial_mass_fn, r, rhos, ell, belly_cap=160, order=16,
                        levels=9):
    """Mean of a radial function over a disk of radius r, center at distance rho.

    radial_fn(s) is the profile; radial_mass_fn(t) = int_0^t s*profile(s) ds
    covers the fully enclosed annuli (may be None to integrate numerically).
    Returns an array over rhos.
    """
    rhos = np.asarray(rhos, dtype=float)
    out = np.zeros_like(rhos)
    # x-grid shared by every rho: graded into both tangency endpoints where
    # the arc angle has sqrt-type derivative blowup, with a belly refined to
    # the length scale of the radial profile
    n_fine = int(min(max(min(24, 3 * belly_cap // 4), math.ceil(4.0 * 2.0 * r / max(ell, 1e-12))), belly_cap))
    xg, wg_ = _sqrt_graded_unit_nodes(order, levels)
    belly_lo, belly_hi = 0.02, 0.98
    xs_b, ws_b = _panel_nodes(belly_lo, belly_hi, (), (belly_hi - belly_lo) / n_fine, order)
    xs = np.concatenate([xg * belly_lo, xs_b, belly_hi + xg * (1.0 - belly_hi)])
    ws = np.concatenate([wg_ * belly_lo, ws_b, wg_ * (1.0 - belly_hi)])

    inv_area = 1.0 / (math.pi * r * r)
    xf = (np.arange(4 * n_fine) + 0.5) / (4 * n_fine)
    inside = rhos < r
    if np.any(inside):
        enclosed = np.maximum(r - rhos[inside], 0.0)
        if radial_mass_fn is not None:
            m = radial_mass_fn(enclosed)
        else:
            sgrid = enclosed[:, None] * xf[None, :]
            m = (radial_fn(sgrid) * sgrid).sum(axis=1) * enclosed / (4 * n_fine)
        out[inside] = 2.0 * math.pi * m * inv_area

    lo = np.abs(r - rhos)
    hi = r + rhos
    span = hi - lo
    pos = span > 0.0
    if np.any(pos):
        s_mat = lo[pos, None] + span[pos, None] * xs[None, :]
        th = _arc_angle(s_mat, rhos[pos, None], r)
        vals = radial_fn(s_mat) * th * s_mat
        out[pos] += inv_area * span[pos] * (vals @ ws)
    return out


def _round_up_half(x: float) -> float:
    return 0.5 * math.ceil(max(x, 1e-9) / 0.5)


def _table_knobs(density: int):
    """(belly panel cap, GL order, grading levels) for spline table builds."""
    if density >= 12:
        return min(16 * density, 200), 16, 9
    return min(16 * density, 200), 8, 6


@lru_cache(maxsize=512)
def _disk_profile_table(spec: KernelSpec, r: float, rho_max_key: float, density: int):
    """Spline of rho -> Cov(disk mean(r), point at distance rho)."""
    ell = spec.min_length_scale()
    h = min(ell, r, 0.05) / density
    n = int(min(max(math.ceil(rho_max_key / h), 30 * density), 100 * density))
    rhos = np.linspace(0.0, rho_max_key, n + 1)
    cap, order, levels = _table_knobs(density)
    vals = _disk_point_profile(
        lambda s: kappa(spec, s), lambda t: ks1(spec, t), r, rhos, ell,
        belly_cap=cap, order=order, levels=levels,
    )
    return CubicSpline(rhos, vals)


@lru_cache(maxsize=512)
def _disk_disk_table(spec: KernelSpec, ra: float, rb: float, rho_max_key: float, density: int):
    """Spline of rho -> Cov(disk mean(ra), disk mean(rb)) at center distance rho."""
    inner = _disk_profile_table(spec, rb, _round_up_half(rho_max_key + ra), density)
    g = CubicSpline(inner.x, inner(inner.x) * inner.x)  # s * A_b(s)
    mass = g.antiderivative()
    ell = spec.min_length_scale()
    h = min(ell, ra, rb, 0.05) / density
    n = int(min(max(math.ceil(rho_max_key / h), 30 * density), 100 * density))
    rhos = np.linspace(0.0, rho_max_key, n + 1)
    cap, order, levels = _table_knobs(density)
    vals = _disk_point_profile(inner, lambda t: mass(t), ra, rhos, min(ell, rb),
                               belly_cap=cap, order=order, levels=levels)
    return CubicSpline(rhos, vals)


def _cov_disk_point(spec, rho, r, fast: bool, density: int):
    rho = np.asarray(rho, dtype=float)
    if fast:
        key = _round_up_half(float(np.max(rho)) if rho.size else 1.0)
        return _disk_profile_table(spec, r, key, density)(rho)
    ell = spec.min_length_scale()
    return _disk_point_profile(
        lambda s: kappa(spec, s), lambda t: ks1(spec, t), r, np.atleast_1d(rho), ell,
        belly_cap=1200,
    )


def _cov_disk_disk(spec, rho, ra, rb, fast: bool, density: int):
    rho = np.asarray(rho, dtype=float)
    if ra > rb:
        ra, rb = rb, ra
    if fast:
        key = _round_up_half(float(np.max(rho)) if rho.size else 1.0)
        return _disk_disk_table(spec, ra, rb, key, density)(rho)
    ell = spec.min_length_scale()
    inner_fn = lambda s: _cov_disk_point(spec, s.ravel(), rb, False, density).reshape(s.shape)
    return _disk_point_profile(inner_fn, None, ra, np.atleast_1d(rho), min(ell, rb),
                               belly_cap=1200)


# ---------------------------------------------------------------------------
# public pair covariance and vectorized gram builder
# ---------------------------------------------------------------------------

_KIND_ORDER = {"point": 0, "interval_mean": 1, "smoothed_gradient": 2, "disk_mean": 3}


def _pair_cov_1d(spec, ka, wa, kb, wb, delta, order):
    """Dispatch on effective kinds; delta = loc_a - loc_b (array ok)."""
    if ka == "point" and kb == "point":
        return kappa(spec, delta)
    if ka == "interval_mean" and kb == "point":
        return _cov_interval_point(spec, delta, wa)
    if ka == "point" and kb == "interval_mean":
        return _cov_interval_point(spec, -np.asarray(delta, dtype=float), wb)
    if ka == "interval_mean" and kb == "interval_mean":
        return _cov_interval_interval(spec, delta, wa, wb)
    if ka == "smoothed_gradient" and kb == "point":
        return _cov_grad_point(spec, delta, wa)
    if ka == "point" and kb == "smoothed_gradient":
        return _cov_grad_point(spec, -np.asarray(delta, dtype=float), wb)
    if ka == "smoothed_gradient" and kb == "smoothed_gradient":
        return _cov_grad_grad(spec, delta, wa, wb)
    if ka == "smoothed_gradient" and kb == "interval_mean":
        return _cov_grad_interval(spec, delta, wa, wb)
    if ka == "interval_mean" and kb == "smoothed_gradient":
        return _cov_grad_interval(spec, -np.asarray(delta, dtype=float), wb, wa)
    raise NotImplementedError(f"unsupported operator pair ({ka}, {kb})")


def _quad_knobs(quad: QuadratureRule | None):
    """(GL panel order, disk table density) from the optional rule argument."""
    if quad is None:
        return 16, 24
    if quad.kind == "interval":
        return max(4, quad.order // 2), 24
    return 16, max(4, int(round(24 * quad.order / 20.0)))


def operator_cross_cov(
    spec: KernelSpec,
    a: ObservationOperator,
    b: ObservationOperator,
    quad: QuadratureRule | None = None,
) -> float:
    """Prior covariance between two observables under the given kernel.

    Exact in arithmetic for point/interval pairs under Matern kernels;
    other pairs use panel quadrature tight enough that 30-operator gram
    matrices stay positive semidefinite to ~1e-10 relative.
    """
    if a.dim != b.dim:
        raise ValueError("operators live in different dimensions")
    order, density = _quad_knobs(quad)
    # canonical orientation makes Cov(a, b) == Cov(b, a) bit-exact
    if (_KIND_ORDER[a.effective_kind()], a.width, a.location) < (
        _KIND_ORDER[b.effective_kind()], b.width, b.location
    ):
        a, b = b, a
    ka, kb = a.effective_kind(), b.effective_kind()
    if a.dim == 1:
        delta = a.location[0] - b.location[0]
        if ka == "disk_mean" or kb == "disk_mean":
            raise NotImplementedError("disk_mean requires 2-D locations")
        out = _pair_cov_1d(spec, ka, a.width, kb, b.width, np.float64(delta), order)
        return float(out)
    if a.dim == 2:
        rho = math.dist(a.location, b.location)
        if ka == "point" and kb == "point":
            return float(kappa(spec, rho))
        if ka == "disk_mean" and kb == "point":
            return float(_cov_disk_point(spec, rho, a.width, False, density)[0])
        if ka == "disk_mean" and kb == "disk_mean":
            return float(_cov_disk_disk(spec, rho, a.width, b.width, False, density)[0])
        raise NotImplementedError(
            f"unsupported operator pair ({a.kind}, {b.kind}) in 2-D"
        )
    raise NotImplementedError("only 1-D and 2-D domains are supported")


def cross_cov_matrix(
    spec: KernelSpec,
    ops_a: list[ObservationOperator],
    ops_b: list[ObservationOperator],
    quad: QuadratureRule | None = None,
) -> np.ndarray:
    """Gram block Cov(ops_a, ops_b), grouped by operator family for speed.

    Disk pairs go through cached radial-profile splines; everything else is
    computed by the same reductions as operator_cross_cov.
    """
    order, density = _quad_knobs(quad)
    out = np.empty((len(ops_a), len(ops_b)))
    if not len(ops_a) or not len(ops_b):
        return out.reshape(len(ops_a), len(ops_b))
    dim = ops_a[0].dim
    for op in list(ops_a) + list(ops_b):
        if op.dim != dim:
            raise ValueError("operators live in different dimensions")

    def groups(ops):
        g: dict[tuple[str, float], list[int]] = {}
        for i, op in enumerate(ops):
            g.setdefault((op.effective_kind(), op.width if op.effective_kind() != "point" else 0.0), []).append(i)
        return g

    ga, gb = groups(ops_a), groups(ops_b)
    loc_a = np.array([op.location for op in ops_a])
    loc_b = np.array([op.location for op in ops_b])
    for (kind_a, wa), ia in ga.items():
        for (kind_b, wb), ib in gb.items():
            sub_a = loc_a[ia]
            sub_b = loc_b[ib]
            if dim == 1:
                delta = sub_a[:, 0][:, None] - sub_b[:, 0][None, :]
                block = _pair_cov_1d(spec, kind_a, wa, kind_b, wb, delta, order)
            else:
                rho = np.sqrt(((sub_a[:, None, :] - sub_b[None, :, :]) ** 2).sum(-1))
                if kind_a == "point" and kind_b == "point":
                    block = kappa(spec, rho)
                elif kind_a == "disk_mean" and kind_b == "point":
                    block = _cov_disk_point(spec, rho.ravel(), wa, True, density).reshape(rho.shape)
                elif kind_a == "point" and kind_b == "disk_mean":
                    block = _cov_disk_point(spec, rho.ravel(), wb, True, density).reshape(rho.shape)
                elif kind_a == "disk_mean" and kind_b == "disk_mean":
                    block = _cov_disk_disk(spec, rho.ravel(), wa, wb, True, density).reshape(rho.shape)
                else:
                    raise NotImplementedError(
                        f"unsupported operator pair ({kind_a}, {kind_b}) in 2-D"
                    )
            out[np.ix_(ia, ib)] = block
    return out
