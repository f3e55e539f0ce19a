"""Experiment runner: task protocols, replica loops, metrics, CSV records,
and the flat key=value config format."""
from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, fields

import numpy as np

from .gp import Dataset, GPModel, fit_posterior
from .kernels import KernelSpec, ObservationOperator, QuadratureRule
from .policies import (
    MAX_POLICY_KINDS,
    AcquisitionState,
    EstimationConfig,
    MaxPolicy,
    estimation_fixed_width_step,
    estimation_random_step,
    estimation_step,
    max_search_step,
)
from .problems import (
    BENCHMARKS,
    gen_random_function,
    load_elevation_grid,
    true_disk_mean,
    true_interval_mean,
    true_smoothed_gradient,
)

TASKS = (
    "estimation_1d",
    "gradient_1d",
    "elevation_2d",
    "max_search_1d",
    "max_search_benchmark",
)

ESTIMATION_POLICIES = ("gp_dc", "random", "wmin_varmax")

#: the width menu of the 1-D estimation experiments
ESTIMATION_WIDTHS = (0.0, 0.0875, 0.175, 0.2625, 0.35, 0.4375, 0.525, 0.6125, 0.7)
#: the width menu of the smoothed-gradient experiments (zero excluded: an
#: exact gradient observation is not available)
GRADIENT_WIDTHS = (0.02, 0.0875, 0.175, 0.2625, 0.35, 0.4375, 0.525, 0.6125, 0.7)
#: the radius menu of the 2-D elevation experiments
ELEVATION_RADII = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4)


class ConfigError(ValueError):
    """Raised for malformed experiment configs (unknown/invalid keys)."""


class UndefinedMetricError(ValueError):
    """Raised when a requested metric is undefined (e.g. constant truth)."""


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    policies: tuple[str, ...]
    steps: int
    replicas: int = 1
    seed: int = 0
    n_draws: int = 200
    grid_size: int = 0
    widths: tuple[float, ...] = ()
    alpha: float = 1.0
    noise_variance: float = 0.0
    candidate_count: int = 0
    hyper_budget: int = 20
    disk_fit_quad_order: int = 10
    disk_hyper_quad_order: int = 2
    benchmark: str = ""
    grid_path: str = ""
    out: str = ""
    timing: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.steps < 1 or self.replicas < 1:
            raise ConfigError("steps and replicas must be >= 1")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        est = self.task in ("estimation_1d", "gradient_1d", "elevation_2d")
        valid = ESTIMATION_POLICIES if est else MAX_POLICY_KINDS
        for p in self.policies:
            if p not in valid:
                raise ConfigError(f"policy {p!r} is not valid for task {self.task!r}")
        if self.task == "max_search_benchmark" and self.benchmark not in BENCHMARKS:
            raise ConfigError(
                f"benchmark must be one of {sorted(BENCHMARKS)}, got {self.benchmark!r}"
            )
        if self.task == "elevation_2d" and not self.grid_path:
            raise ConfigError("elevation_2d requires grid_path")
        if self.noise_variance < 0.0:
            raise ConfigError("noise_variance must be nonnegative")

    def width_menu(self) -> tuple[float, ...]:
        if self.widths:
            return tuple(float(w) for w in self.widths)
        if self.task == "estimation_1d":
            return ESTIMATION_WIDTHS
        if self.task == "gradient_1d":
            return GRADIENT_WIDTHS
        if self.task == "elevation_2d":
            return ELEVATION_RADII
        return ()

    def effective_grid_size(self) -> int:
        """Grid points for 1-D tasks, mesh side for 2-D tasks."""
        if self.grid_size > 0:
            return self.grid_size
        if self.task == "max_search_1d":
            return 240
        if self.task in ("elevation_2d", "max_search_benchmark"):
            return 30
        return 120


_BOOL_WORDS = {"true": True, "on": True, "1": True, "yes": True,
               "false": False, "off": False, "0": False, "no": False}


def _parse_value(name: str, kind, raw: str):
    raw = raw.strip()
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is bool:
        if raw.lower() not in _BOOL_WORDS:
            raise ConfigError(f"key {name}: expected a boolean, got {raw!r}")
        return _BOOL_WORDS[raw.lower()]
    if kind is str:
        return raw
    # tuple-typed keys: comma-separated
    items = [t.strip() for t in raw.split(",") if t.strip()]
    if name == "widths":
        return tuple(float(t) for t in items)
    return tuple(items)


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat `key = value` format; unknown keys are errors."""
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    types = {
        "task": str, "policies": tuple, "steps": int, "replicas": int,
        "seed": int, "n_draws": int, "grid_size": int, "widths": tuple,
        "alpha": float, "noise_variance": float, "candidate_count": int,
        "hyper_budget": int, "disk_fit_quad_order": int,
        "disk_hyper_quad_order": int, "benchmark": str, "grid_path": str,
        "out": str, "timing": bool,
    }
    got: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in got:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            got[key] = _parse_value(key, types[key], raw)
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    for required in ("task", "policies", "steps"):
        if required not in got:
            raise ConfigError(f"missing required key {required!r}")
    return ExperimentConfig(**got)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# records and metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    replica: int
    step: int
    policy: str
    kind: str
    location: tuple[float, ...]
    width: float
    y: float
    metric: float
    ms: float


def write_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("replica,step,policy,kind,location,width,y,metric,ms\n")
        for r in records:
            loc = ";".join(repr(float(v)) for v in r.location)
            fh.write(
                f"{r.replica},{r.step},{r.policy},{r.kind},{loc},"
                f"{repr(float(r.width))},{repr(float(r.y))},"
                f"{repr(float(r.metric))},{repr(float(r.ms))}\n"
            )


def read_records(path) -> list[RunRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "replica,step,policy,kind,location,width,y,metric,ms":
            raise ValueError(f"unexpected CSV header {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != 9:
                raise ValueError(f"malformed CSV row: {line!r}")
            out.append(
                RunRecord(
                    replica=int(parts[0]),
                    step=int(parts[1]),
                    policy=parts[2],
                    kind=parts[3],
                    location=tuple(float(t) for t in parts[4].split(";")),
                    width=float(parts[5]),
                    y=float(parts[6]),
                    metric=float(parts[7]),
                    ms=float(parts[8]),
                )
            )
    return out


def compute_r2(predicted, truth) -> float:
    """Coefficient of determination of predicted against truth."""
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape or truth.size < 2:
        raise ValueError("predicted and truth must share a length >= 2")
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("R^2 is undefined for constant truth")
    ss_res = float(np.sum((predicted - truth) ** 2))
    return 1.0 - ss_res / ss_tot


def compute_regret(true_max: float, ys) -> float:
    """Simple regret after the given observations: true max minus best y."""
    ys = np.asarray(ys, dtype=float)
    if ys.size < 1:
        raise ValueError("need at least one observation")
    return max(float(true_max) - float(np.max(ys)), 0.0)


def cumulative_regret(true_max: float, ys, lo: int, hi: int) -> float:
    """Sum of the simple-regret trace over observation counts lo..hi."""
    ys = np.asarray(ys, dtype=float)
    hi = min(hi, ys.size)
    if lo < 1 or lo > hi:
        raise ValueError("need 1 <= lo <= hi <= len(ys)")
    best = np.maximum.accumulate(ys)
    trace = np.maximum(float(true_max) - best, 0.0)
    return float(np.sum(trace[lo - 1 : hi]))


def summarize(records, stat: str = "cum_regret", window: tuple[int, int] = (20, 50),
              normalize_by: str | None = None) -> list[dict]:
    """Per-policy median and quartiles of a per-replica scalar.

    stat "cum_regret" sums the regret metric over the window of observation
    indices; "mean_metric" averages the metric over all steps.  normalize_by
    divides every statistic by that policy's median.
    """
    if stat not in ("cum_regret", "mean_metric"):
        raise ValueError(f"unknown stat {stat!r}")
    by_policy: dict[str, dict[int, list[RunRecord]]] = {}
    for r in records:
        by_policy.setdefault(r.policy, {}).setdefault(r.replica, []).append(r)
    per_policy_values: dict[str, np.ndarray] = {}
    for policy, reps in by_policy.items():
        vals = []
        for rows in reps.values():
            rows = sorted(rows, key=lambda r: r.step)
            metric = np.array([r.metric for r in rows])
            if stat == "mean_metric":
                vals.append(float(metric.mean()))
            else:
                lo, hi = window
                hi = min(hi, rows[-1].step)
                sel = [m for r, m in zip(rows, metric) if lo <= r.step <= hi]
                vals.append(float(np.sum(sel)))
        per_policy_values[policy] = np.array(vals)
    scale = 1.0
    if normalize_by is not None:
        if normalize_by not in per_policy_values:
            raise ValueError(f"no records for normalization policy {normalize_by!r}")
        scale = float(np.median(per_policy_values[normalize_by]))
        if scale == 0.0:
            raise ValueError("normalization policy has zero median")
    out = []
    for policy in sorted(per_policy_values):
        q25, med, q75 = np.percentile(per_policy_values[policy], [25.0, 50.0, 75.0])
        out.append(
            {
                "policy": policy,
                "median": float(med / scale),
                "q25": float(q25 / scale),
                "q75": float(q75 / scale),
                "replicas": len(per_policy_values[policy]),
            }
        )
    return out


# ---------------------------------------------------------------------------
# task protocols
# ---------------------------------------------------------------------------

_BASE_KERNEL = KernelSpec("matern52", length_scale=0.3, signal_variance=1.0)


def _base_model() -> GPModel:
    return GPModel(_BASE_KERNEL, noise_variance=1e-6, normalize_y=True)


def _hyper_seed(seed: int) -> int:
    return seed * 1_000_003 + 17


def _maybe_noise(y: float, cfg: ExperimentConfig, rng: np.random.Generator) -> float:
    if cfg.noise_variance > 0.0:
        return y + math.sqrt(cfg.noise_variance) * rng.standard_normal()
    return y


class _EstimationTask:
    """Everything replica-independent for one estimation-style task."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        if cfg.task == "elevation_2d":
            self.grid2d = load_elevation_grid(cfg.grid_path)
            side = np.linspace(0.0, 1.0, cfg.effective_grid_size())
            gx, gy = np.meshgrid(side, side, indexing="xy")
            self.grid = np.column_stack([gx.ravel(), gy.ravel()])
            self.lo, self.hi = (0.0, 0.0), (1.0, 1.0)
            self.operator_kind = "disk_mean"
            self.fit_quad = QuadratureRule("disk", cfg.disk_fit_quad_order, (), ())
            self.hyper_quad = QuadratureRule("disk", cfg.disk_hyper_quad_order, (), ())
        else:
            self.grid = np.linspace(0.0, 1.0, cfg.effective_grid_size())
            self.lo, self.hi = (0.0,), (1.0,)
            self.operator_kind = (
                "smoothed_gradient" if cfg.task == "gradient_1d" else "interval_mean"
            )
            self.fit_quad = None
            self.hyper_quad = None
        self.widths = cfg.width_menu()

    def estimation_config(self) -> EstimationConfig:
        cand = self.cfg.candidate_count if self.cfg.candidate_count > 0 else None
        if self.cfg.task == "elevation_2d" and self.cfg.candidate_count == 0:
            cand = 100
        return EstimationConfig(
            widths=self.widths,
            operator_kind=self.operator_kind,
            grid=self.grid,
            n_draws=self.cfg.n_draws,
            alpha=self.cfg.alpha,
            candidate_count=cand,
            hyper_budget=self.cfg.hyper_budget,
            fit_quad=self.fit_quad,
            hyper_quad=self.hyper_quad,
        )

    def make_replica(self, replica_seed: int):
        if self.cfg.task == "elevation_2d":
            grid2d = self.grid2d
            mesh = self.grid

            def observe(op: ObservationOperator) -> float:
                if op.effective_kind() == "point":
                    return float(grid2d.value_at(op.location[0], op.location[1]))
                return true_disk_mean(grid2d, op.location, op.width)

            truth = grid2d.value_at(mesh[:, 0], mesh[:, 1])
            return observe, truth
        f = gen_random_function(replica_seed)

        def observe(op: ObservationOperator) -> float:
            q = op.location[0]
            if op.effective_kind() == "point":
                return float(f(q))
            if op.effective_kind() == "interval_mean":
                return true_interval_mean(f, q, op.width)
            return true_smoothed_gradient(f, q, op.width)

        return observe, np.asarray(f(self.grid), dtype=float)

    def initial_operators(self, rng: np.random.Generator) -> list[ObservationOperator]:
        if self.cfg.task == "gradient_1d":
            return [
                ObservationOperator("point", (0.0,)),
                ObservationOperator("point", (1.0,)),
            ]
        ops = []
        grid = np.atleast_2d(self.grid) if self.grid.ndim == 2 else self.grid[:, None]
        for _ in range(2):
            loc = tuple(float(v) for v in grid[int(rng.integers(grid.shape[0]))])
            w = float(self.widths[int(rng.integers(len(self.widths)))])
            ops.append(_make_operator(self.operator_kind, loc, w))
        return ops


def _make_operator(kind: str, loc: tuple, width: float) -> ObservationOperator:
    width = float(width)
    if width == 0.0:
        return ObservationOperator("point", loc)
    return ObservationOperator(kind, loc, width)


def _run_estimation_replica(task: _EstimationTask, policy: str, replica: int) -> list[RunRecord]:
    cfg = task.cfg
    seed = cfg.seed + replica
    rng = np.random.default_rng(seed)
    observe, truth = task.make_replica(seed)
    est_cfg = task.estimation_config()
    state = AcquisitionState(rng=rng, hyper_seed=_hyper_seed(seed))
    model = _base_model()
    data = Dataset((), task.lo, task.hi)
    records: list[RunRecord] = []

    def log(op: ObservationOperator, t0: float) -> None:
        nonlocal data
        y = _maybe_noise(observe(op), cfg, rng)
        data = data.append(op, y)
        fit_model = state.model if state.model is not None else model
        post = fit_posterior(fit_model, data, est_cfg.grid, quad=est_cfg.fit_quad)
        metric = compute_r2(post.mean, truth)
        ms = (time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0
        records.append(
            RunRecord(replica, len(data.records), policy, op.kind,
                      op.location, op.width, y, metric, ms)
        )

    for op in task.initial_operators(rng):
        log(op, time.perf_counter())
    for _ in range(cfg.steps):
        t0 = time.perf_counter()
        if policy == "gp_dc":
            w, loc = estimation_step(model, data, est_cfg, state)
        elif policy == "wmin_varmax":
            w, loc = estimation_fixed_width_step(model, data, est_cfg, state,
                                                 min(est_cfg.widths))
        elif policy == "random":
            w, loc = estimation_random_step(est_cfg, state)
        else:  # pragma: no cover - config validation rejects other names
            raise ValueError(f"unknown estimation policy {policy!r}")
        log(_make_operator(task.operator_kind, loc, w), t0)
    return records


class _MaxSearchTask:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        if cfg.task == "max_search_benchmark":
            self.bench = BENCHMARKS[cfg.benchmark]
            side = np.linspace(0.0, 1.0, cfg.effective_grid_size())
            gx, gy = np.meshgrid(side, side, indexing="xy")
            self.grid = np.column_stack([gx.ravel(), gy.ravel()])
            self.lo, self.hi = (0.0, 0.0), (1.0, 1.0)
            self.true_max = -self.bench.known_min
        else:
            self.grid = np.linspace(0.0, 1.0, cfg.effective_grid_size())
            self.lo, self.hi = (0.0,), (1.0,)
            self.true_max = math.nan  # per replica

    def make_replica(self, replica_seed: int):
        if self.cfg.task == "max_search_benchmark":
            bench = self.bench
            lo = np.array(bench.lo)
            hi = np.array(bench.hi)

            def observe(loc: tuple) -> float:
                x = lo + np.asarray(loc) * (hi - lo)
                return -float(bench.fn(x[0], x[1]))

            return observe, self.true_max
        f = gen_random_function(replica_seed)

        def observe(loc: tuple) -> float:
            return float(f(loc[0]))

        return observe, float(np.max(f.values))


def _run_max_search_replica(task: _MaxSearchTask, policy_name: str, replica: int) -> list[RunRecord]:
    cfg = task.cfg
    seed = cfg.seed + replica
    rng = np.random.default_rng(seed)
    observe, true_max = task.make_replica(seed)
    state = AcquisitionState(rng=rng, hyper_seed=_hyper_seed(seed))
    policy = MaxPolicy(kind=policy_name, n_draws=cfg.n_draws, alpha=cfg.alpha,
                       hyper_budget=cfg.hyper_budget)
    model = _base_model()
    grid = np.atleast_2d(task.grid) if task.grid.ndim == 2 else task.grid[:, None]
    data = Dataset((), task.lo, task.hi)
    ys: list[float] = []
    records: list[RunRecord] = []

    def log(loc: tuple, t0: float) -> None:
        nonlocal data
        y = _maybe_noise(observe(loc), cfg, rng)
        data = data.append(ObservationOperator("point", loc), y)
        ys.append(y)
        metric = compute_regret(true_max, ys)
        ms = (time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0
        records.append(
            RunRecord(replica, len(ys), policy_name, "point", loc, 0.0, y, metric, ms)
        )

    for _ in range(2):
        t0 = time.perf_counter()
        loc = tuple(float(v) for v in grid[int(rng.integers(grid.shape[0]))])
        log(loc, t0)
    for _ in range(cfg.steps):
        t0 = time.perf_counter()
        idx = max_search_step(model, data, policy, grid, state)
        log(tuple(float(v) for v in grid[idx]), t0)
    return records


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    """Run every (policy, replica) cell; a failed replica logs and is skipped."""
    est = cfg.task in ("estimation_1d", "gradient_1d", "elevation_2d")
    task = _EstimationTask(cfg) if est else _MaxSearchTask(cfg)
    records: list[RunRecord] = []
    for policy in cfg.policies:
        for replica in range(cfg.replicas):
            try:
                if est:
                    records.extend(_run_estimation_replica(task, policy, replica))
                else:
                    records.extend(_run_max_search_replica(task, policy, replica))
            except Exception as exc:  # noqa: BLE001 - a replica must not kill the batch
                print(
                    f"warning: policy {policy!r} replica {replica} failed: {exc}",
                    file=sys.stderr,
                )
    records.sort(key=lambda r: (r.policy, r.replica, r.step))
    if cfg.out:
        write_records(records, cfg.out)
    return records
