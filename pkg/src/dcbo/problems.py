"""Ground-truth targets: random 1-D functions, 2-D benchmark functions, and
gridded elevation surfaces, plus the exact observation oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .gp import _chol_jittered
from .kernels import KernelSpec, disk_quadrature_nodes, kappa

RANDOM_FUNCTION_KERNEL = KernelSpec(
    "sum",
    children=(
        KernelSpec("rq", length_scale=0.02, signal_variance=1.0, rq_mixture=1.0),
        KernelSpec("matern32", length_scale=0.02, signal_variance=1.0),
    ),
)

#: default quadrature step for the 1-D observation oracles: a tenth of the
#: random-function length scale
ORACLE_STEP = 0.002


@dataclass(frozen=True)
class RandomFunction:
    """A prior draw tabulated on a dense uniform grid over [0, 1], held
    constant beyond the interval ends."""

    xs: np.ndarray
    values: np.ndarray
    seed: int

    def __post_init__(self):
        self.xs.flags.writeable = False
        self.values.flags.writeable = False

    def __call__(self, x):
        # np.interp clamps to the end values, which is exactly the
        # constant-extension rule
        return np.interp(x, self.xs, self.values)


def gen_random_function(seed: int, size: int = 1200) -> RandomFunction:
    """Exact GP prior draw (RQ + Matern 3/2, both length scale 0.02)."""
    xs = np.linspace(0.0, 1.0, size)
    gram = kappa(RANDOM_FUNCTION_KERNEL, np.abs(xs[:, None] - xs[None, :]))
    chol = _chol_jittered(gram, 1e-10)
    rng = np.random.default_rng(seed)
    return RandomFunction(xs, chol @ rng.standard_normal(size), seed)


# ---------------------------------------------------------------------------
# benchmark functions
# ---------------------------------------------------------------------------

def _himmelblau(x, y):
    return (x**2 + y - 11.0) ** 2 + (x + y**2 - 7.0) ** 2


def _eggholder(x, y):
    return -(y + 47.0) * np.sin(np.sqrt(np.abs(x / 2.0 + y + 47.0))) - x * np.sin(
        np.sqrt(np.abs(x - (y + 47.0)))
    )


def _branin(x, y):
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    t = 1.0 / (8.0 * math.pi)
    return (y - b * x**2 + c * x - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x) + 10.0


def _goldstein_price(x, y):
    u = 1.0 + (x + y + 1.0) ** 2 * (
        19.0 - 14.0 * x + 3.0 * x**2 - 14.0 * y + 6.0 * x * y + 3.0 * y**2
    )
    v = 30.0 + (2.0 * x - 3.0 * y) ** 2 * (
        18.0 - 32.0 * x + 12.0 * x**2 + 48.0 * y - 36.0 * x * y + 27.0 * y**2
    )
    return u * v


@dataclass(frozen=True)
class Benchmark:
    """A 2-D test function, its domain box, and its known minimum."""

    name: str
    fn: Callable
    lo: tuple[float, float]
    hi: tuple[float, float]
    known_min: float
    argmin: tuple[float, float]


BENCHMARKS: dict[str, Benchmark] = {
    b.name: b
    for b in (
        Benchmark("himmelblau", _himmelblau, (-5.0, -5.0), (5.0, 5.0), 0.0, (3.0, 2.0)),
        Benchmark("eggholder", _eggholder, (-512.0, -512.0), (512.0, 512.0),
                  -959.640663, (512.0, 404.2319)),
        Benchmark("branin", _branin, (-5.0, 0.0), (10.0, 15.0), 0.39788736,
                  (math.pi, 2.275)),
        Benchmark("goldstein_price", _goldstein_price, (-2.0, -2.0), (2.0, 2.0),
                  3.0, (0.0, -1.0)),
    )
}


def eval_benchmark(bench: Benchmark, x) -> float:
    """Raw (un-negated) benchmark value; maximization harnesses negate it."""
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError("benchmark point must be a 2-vector")
    for c, a, b in zip(x, bench.lo, bench.hi):
        if not (a <= c <= b):
            raise ValueError(f"point {tuple(x)} outside the {bench.name} domain")
    return float(bench.fn(x[0], x[1]))


# ---------------------------------------------------------------------------
# observation oracles
# ---------------------------------------------------------------------------

def _even(n: int) -> int:
    return n + (n % 2)


def true_interval_mean(f, q: float, w: float, step: float = ORACLE_STEP) -> float:
    """Mean of f over [q - w/2, q + w/2] by composite Simpson quadrature."""
    if w < 0.0:
        raise ValueError("width must be nonnegative")
    if w == 0.0:
        return float(f(q))
    n = max(_even(math.ceil(w / step)), 8)
    xs = np.linspace(q - 0.5 * w, q + 0.5 * w, n + 1)
    return float(simpson(np.asarray(f(xs), dtype=float), x=xs) / w)


def true_smoothed_gradient(f, q: float, w: float, step: float = ORACLE_STEP) -> float:
    """Derivative at q of f convolved with a Gaussian of width w."""
    if w <= 0.0:
        raise ValueError("smoothed gradient requires a positive width")
    h = min(step, w / 10.0)
    n = max(_even(math.ceil(12.0 * w / h)), 16)
    xs = np.linspace(q - 6.0 * w, q + 6.0 * w, n + 1)
    weight = (xs - q) / w**2 * np.exp(-0.5 * ((xs - q) / w) ** 2) / (
        w * math.sqrt(2.0 * math.pi)
    )
    return float(simpson(np.asarray(f(xs), dtype=float) * weight, x=xs))


# ---------------------------------------------------------------------------
# elevation grids
# ---------------------------------------------------------------------------

class GridFormatError(ValueError):
    """Raised for malformed elevation grid files; carries the 1-based line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class ElevationGrid:
    """H x W surface mapped onto the unit square with reflection extension.

    Row 0 is the top edge (y = 1); values are stored rescaled to [0, 1].
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError("elevation grid must be at least 2x2")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def value_at(self, x, y):
        """Bilinear surface value; coordinates reflect about the edges."""
        x = _reflect_unit(np.asarray(x, dtype=float))
        y = _reflect_unit(np.asarray(y, dtype=float))
        h, w = self.values.shape
        col = x * (w - 1)
        row = (1.0 - y) * (h - 1)
        i = np.clip(np.floor(row).astype(int), 0, h - 2)
        j = np.clip(np.floor(col).astype(int), 0, w - 2)
        tr = row - i
        tc = col - j
        v = self.values
        out = (
            v[i, j] * (1 - tr) * (1 - tc)
            + v[i + 1, j] * tr * (1 - tc)
            + v[i, j + 1] * (1 - tr) * tc
            + v[i + 1, j + 1] * tr * tc
        )
        return float(out) if out.ndim == 0 else out


def _reflect_unit(t: np.ndarray) -> np.ndarray:
    u = np.mod(np.abs(t), 2.0)  # abs first keeps small negatives exact
    return np.where(u > 1.0, 2.0 - u, u)


def rescale_elevation(raw) -> ElevationGrid:
    """Affinely map raw heights onto [0, 1] (a constant surface maps to 0)."""
    raw = np.asarray(raw, dtype=float)
    span = raw.max() - raw.min()
    if span == 0.0:
        return ElevationGrid(np.zeros_like(raw))
    return ElevationGrid((raw - raw.min()) / span)


def true_disk_mean(grid: ElevationGrid, center, radius: float, degree: int = 30) -> float:
    """Mean of the surface over a disk, by a polynomially exact cubature."""
    if radius < 0.0:
        raise ValueError("radius must be nonnegative")
    cx, cy = float(center[0]), float(center[1])
    if radius == 0.0:
        return float(grid.value_at(cx, cy))
    rule = disk_quadrature_nodes(radius, (cx, cy), degree=degree, convention="mean")
    pts = np.asarray(rule.points)
    wts = np.asarray(rule.weights)
    return float(grid.value_at(pts[:, 0], pts[:, 1]) @ wts)


def load_elevation_grid(path, fmt: str = "ascii") -> ElevationGrid:
    """Parse a plain-text grid: `H W` header then H rows of W numbers."""
    if fmt != "ascii":
        raise ValueError(f"unknown grid format {fmt!r}")
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise GridFormatError("empty file", 1)
    head = lines[0].split()
    if len(head) != 2:
        raise GridFormatError("header must be exactly 'H W'", 1)
    try:
        h, w = int(head[0]), int(head[1])
    except ValueError:
        raise GridFormatError("header must hold two integers", 1) from None
    if h < 2 or w < 2:
        raise GridFormatError("grid must be at least 2x2", 1)
    if len([ln for ln in lines[1:] if ln.strip()]) != h:
        raise GridFormatError(f"expected {h} data rows", len(lines))
    rows = []
    for k, line in enumerate(lines[1 : h + 1], start=2):
        toks = line.split()
        if len(toks) != w:
            raise GridFormatError(f"expected {w} values, found {len(toks)}", k)
        try:
            rows.append([float(t) for t in toks])
        except ValueError:
            raise GridFormatError("unparsable number", k) from None
    return rescale_elevation(np.array(rows))


def save_elevation_grid(grid: ElevationGrid, path) -> None:
    """Writer whose output reparses to a bit-identical grid."""
    h, w = grid.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{h} {w}\n")
        for row in grid.values:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
