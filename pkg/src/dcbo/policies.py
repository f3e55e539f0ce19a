"""Sequential-design policies: dependence-driven width/location selection for
function estimation, dependence-driven max search, and the classical
acquisition baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .depmeasures import mi_knn
from .gp import (
    Dataset,
    GPModel,
    Posterior,
    QuadratureRule,
    apply_operator_to_samples,
    fit_posterior,
    optimize_hypers,
    predictive_variance,
    sample_posterior,
)
from .kernels import NumericalError, ObservationOperator

MAX_POLICY_KINDS = (
    "gp_dcor",
    "gp_dcov",
    "gp_dcor_x",
    "gp_dcov_x",
    "gp_mis",
    "random",
    "var_max",
    "pi",
    "ei",
    "gp_ucb",
    "gp_mi",
    "mes",
)

_ESTIMATION_KINDS = ("interval_mean", "smoothed_gradient", "disk_mean")


@dataclass(frozen=True)
class EstimationConfig:
    """Knobs for one adaptive-width estimation step.

    widths is the menu of allowed observation widths (0 means a plain point
    query); grid carries the representative points where the posterior is
    drawn; candidate_count, when set, restricts each width's variance argmax
    to a fresh uniform subset of the grid.
    """

    widths: tuple[float, ...]
    operator_kind: str
    grid: np.ndarray
    n_draws: int = 200
    alpha: float = 1.0
    candidate_count: int | None = None
    hyper_budget: int = 20
    fit_quad: QuadratureRule | None = None
    hyper_quad: QuadratureRule | None = None

    def __post_init__(self):
        if len(self.widths) == 0:
            raise ValueError("widths menu must be non-empty")
        if any(w < 0 for w in self.widths):
            raise ValueError("widths must be nonnegative")
        if self.operator_kind not in _ESTIMATION_KINDS:
            raise ValueError(f"unknown operator kind {self.operator_kind!r}")
        if self.n_draws < 2:
            raise ValueError("need at least 2 posterior draws")
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim == 1:
            grid = grid[:, None]
        if grid.shape[0] < 2:
            raise ValueError("grid needs at least 2 points")
        grid.flags.writeable = False
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class MaxPolicy:
    """A max-search rule plus every constant any of the rules needs."""

    kind: str
    n_draws: int = 200
    alpha: float = 1.0
    xi: float = 1e-3
    nu: float = 1.0
    delta_ucb: float = 0.05
    delta_mi: float = 1e-10
    k_mes: int = 100
    hyper_budget: int = 20

    def __post_init__(self):
        if self.kind not in MAX_POLICY_KINDS:
            raise ValueError(f"unknown max-search policy kind {self.kind!r}")
        if self.n_draws < 2:
            raise ValueError("n_draws must be at least 2")


@dataclass
class AcquisitionState:
    """Mutable per-replica bookkeeping a policy carries between steps."""

    rng: np.random.Generator
    step: int = 1
    incumbent_best: float = -math.inf
    gamma_hat: float = 0.0
    hyper_seed: int | None = None
    model: GPModel | None = None       # warm-started tuned model
    posterior: Posterior | None = None  # last posterior (metric reuse)
    scores: np.ndarray | None = None    # last per-candidate scores


def _argmax_tied(scores: np.ndarray, rng: np.random.Generator) -> int:
    """Index of the max score; exact ties resolved uniformly at random."""
    scores = np.asarray(scores, dtype=float)
    top = np.flatnonzero(scores == scores.max())
    if len(top) == 1:
        return int(top[0])
    return int(rng.choice(top))


def _hyper_rng(state: AcquisitionState) -> np.random.Generator:
    if state.hyper_seed is None:
        return state.rng
    # a fixed substream keeps the candidate set identical across steps, so
    # kernel-level caches stay warm for the whole replica
    return np.random.default_rng(state.hyper_seed)


def _tune(model: GPModel, data: Dataset, state: AcquisitionState, budget: int,
          quad: QuadratureRule | None) -> GPModel:
    base = state.model if state.model is not None else model
    tuned = optimize_hypers(base, data, _hyper_rng(state), budget=budget, quad=quad)
    state.model = tuned
    return tuned


# ---------------------------------------------------------------------------
# distance-correlation scoring helpers (vectorized over candidates)
# ---------------------------------------------------------------------------

def _centered_dist(rows: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Double-centered alpha-distance matrix of the sample rows and its
    mean-square (the distance variance).

    Sequential row-then-column centering equals the textbook
    a - rowmean - colmean + grandmean form.
    """
    from scipy.spatial.distance import cdist

    d = cdist(rows, rows)
    if alpha != 1.0:
        d = d**alpha
    d -= d.mean(axis=1, keepdims=True)
    d -= d.mean(axis=0, keepdims=True)
    return d, float(np.mean(d * d))


def _dep_vs_target(a_centered: np.ndarray, dvar_a: float, target: np.ndarray,
                   alpha: float, stat: str) -> float:
    b, dvar_b = _centered_dist(target[:, None] if target.ndim == 1 else target, alpha)
    v2 = max(float(np.mean(a_centered * b)), 0.0)
    if stat == "dcov":
        return math.sqrt(v2)
    if dvar_a <= 0.0 or dvar_b <= 0.0:
        return 0.0
    return math.sqrt(min(max(v2 / math.sqrt(dvar_a * dvar_b), 0.0), 1.0))


def _dep_columns(values: np.ndarray, target: np.ndarray, alpha: float,
                 stat: str, chunk: int = 64) -> np.ndarray:
    """Dependence of every draw column against a shared target, vectorized.

    values is the (M, N) draw matrix; target is (M,) or (M, d).  Equals
    dist_cor/dist_cov applied column by column.
    """
    m, n = values.shape
    b, dvar_b = _centered_dist(target[:, None] if target.ndim == 1 else target, alpha)
    out = np.empty(n)
    for lo in range(0, n, chunk):
        v = values[:, lo : lo + chunk]
        d = np.abs(v[:, None, :] - v[None, :, :])
        if alpha != 1.0:
            d = d**alpha
        d -= d.mean(axis=1, keepdims=True)
        d -= d.mean(axis=0, keepdims=True)
        v2 = np.maximum((d * b[:, :, None]).mean(axis=(0, 1)), 0.0)
        if stat == "dcov":
            out[lo : lo + chunk] = np.sqrt(v2)
        else:
            dvar_a = (d * d).mean(axis=(0, 1))
            denom = np.sqrt(dvar_a * dvar_b)
            ok = (denom > 0.0) & (dvar_a > 0.0) & (dvar_b > 0.0)
            r2 = np.where(ok, v2 / np.where(ok, denom, 1.0), 0.0)
            out[lo : lo + chunk] = np.sqrt(np.clip(r2, 0.0, 1.0))
    return out


# ---------------------------------------------------------------------------
# adaptive-width estimation
# ---------------------------------------------------------------------------

def _operator_at(kind: str, loc: np.ndarray, width: float) -> ObservationOperator:
    location = tuple(float(v) for v in np.atleast_1d(loc))
    if width == 0.0:
        return ObservationOperator("point", location)
    return ObservationOperator(kind, location, width)


def estimation_step(
    model: GPModel,
    data: Dataset,
    cfg: EstimationConfig,
    state: AcquisitionState,
) -> tuple[float, tuple[float, ...]]:
    """One adaptive-width estimation decision.

    Tunes hyperparameters, draws n_draws joint posterior samples on the grid,
    and for each width picks the max-predictive-variance location, applies
    the would-be observation to every draw, and scores the distance
    correlation between the draw matrix and the simulated observation
    values.  Returns the (width, location) with the top score.
    """
    if not data.records:
        raise ValueError("estimation_step needs at least one observation")
    if cfg.grid.shape[0] == 0:
        raise ValueError("empty grid")
    tuned = _tune(model, data, state, cfg.hyper_budget, cfg.hyper_quad)
    post = fit_posterior(tuned, data, cfg.grid, quad=cfg.fit_quad)
    state.posterior = post
    draws = sample_posterior(post, cfg.n_draws, state.rng)
    a_centered, dvar_a = _centered_dist(draws.values, cfg.alpha)

    n = cfg.grid.shape[0]
    scores = np.empty(len(cfg.widths))
    chosen: list[ObservationOperator] = []
    for j, w in enumerate(cfg.widths):
        if cfg.candidate_count is not None and cfg.candidate_count < n:
            cand_idx = state.rng.choice(n, size=cfg.candidate_count, replace=False)
        else:
            cand_idx = np.arange(n)
        ops = [_operator_at(cfg.operator_kind, cfg.grid[i], w) for i in cand_idx]
        var = predictive_variance(tuned, data, ops, quad=cfg.fit_quad)
        op = ops[_argmax_tied(var, state.rng)]
        sim = apply_operator_to_samples(draws, cfg.grid, op)
        scores[j] = _dep_vs_target(a_centered, dvar_a, sim, cfg.alpha, "dcor")
        chosen.append(op)
    jhat = _argmax_tied(scores, state.rng)
    state.scores = scores
    state.step += 1
    return cfg.widths[jhat], chosen[jhat].location


def estimation_fixed_width_step(
    model: GPModel,
    data: Dataset,
    cfg: EstimationConfig,
    state: AcquisitionState,
    width: float,
) -> tuple[float, tuple[float, ...]]:
    """Max-variance location at one fixed width (the classical baseline)."""
    if not data.records:
        raise ValueError("estimation step needs at least one observation")
    tuned = _tune(model, data, state, cfg.hyper_budget, cfg.hyper_quad)
    state.posterior = fit_posterior(tuned, data, cfg.grid, quad=cfg.fit_quad)
    n = cfg.grid.shape[0]
    if cfg.candidate_count is not None and cfg.candidate_count < n:
        cand_idx = state.rng.choice(n, size=cfg.candidate_count, replace=False)
    else:
        cand_idx = np.arange(n)
    ops = [_operator_at(cfg.operator_kind, cfg.grid[i], width) for i in cand_idx]
    var = predictive_variance(tuned, data, ops, quad=cfg.fit_quad)
    op = ops[_argmax_tied(var, state.rng)]
    state.scores = var
    state.step += 1
    return width, op.location


def estimation_random_step(
    cfg: EstimationConfig,
    state: AcquisitionState,
) -> tuple[float, tuple[float, ...]]:
    """Uniformly random width and grid location."""
    w = cfg.widths[int(state.rng.integers(len(cfg.widths)))]
    loc = cfg.grid[int(state.rng.integers(cfg.grid.shape[0]))]
    state.step += 1
    return w, tuple(float(v) for v in loc)


# ---------------------------------------------------------------------------
# closed-form acquisition rules
# ---------------------------------------------------------------------------

def acq_pi(mu, sigma, incumbent: float, xi: float = 1e-3):
    """Probability of improving the incumbent by at least xi."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = mu - incumbent - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0.0, gap / np.where(sigma > 0.0, sigma, 1.0), 0.0)
    out = np.where(sigma > 0.0, ndtr(z), (gap > 0.0).astype(float))
    return out if out.ndim else float(out)


def acq_ei(mu, sigma, incumbent: float):
    """Expected improvement over the incumbent."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = mu - incumbent
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0.0, gap / np.where(sigma > 0.0, sigma, 1.0), 0.0)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    out = np.where(sigma > 0.0, gap * ndtr(z) + sigma * phi, np.maximum(gap, 0.0))
    return out if out.ndim else float(out)


def ucb_beta(t: int, d: int, nu: float = 1.0, delta: float = 0.05) -> float:
    """Exploration coefficient sqrt(nu * tau_t) with the standard schedule
    tau_t = 2 log(t^(d/2+2) pi^2 / (3 delta))."""
    if t < 1 or d < 1:
        raise ValueError("need t >= 1 and d >= 1")
    tau = 2.0 * math.log(t ** (d / 2.0 + 2.0) * math.pi**2 / (3.0 * delta))
    return math.sqrt(nu * tau)


def acq_ucb(mu, sigma, t: int, d: int, nu: float = 1.0, delta: float = 0.05):
    """Upper confidence bound mu + sqrt(nu * tau_t) * sigma."""
    beta = ucb_beta(t, d, nu, delta)
    out = np.asarray(mu, dtype=float) + beta * np.asarray(sigma, dtype=float)
    return out if out.ndim else float(out)


def acq_gpmi(mu, sigma, gamma_hat: float, delta: float = 1e-10):
    """Mutual-information acquisition mu + sqrt(alpha)(sqrt(s^2+g) - sqrt(g))."""
    if gamma_hat < 0.0:
        raise ValueError("gamma_hat must be nonnegative")
    alpha = math.log(2.0 / delta)
    sigma = np.asarray(sigma, dtype=float)
    out = np.asarray(mu, dtype=float) + math.sqrt(alpha) * (
        np.sqrt(sigma**2 + gamma_hat) - math.sqrt(gamma_hat)
    )
    return out if out.ndim else float(out)


def update_gamma(state: AcquisitionState, sigma_chosen: float) -> None:
    """Accumulate the chosen point's predictive variance."""
    state.gamma_hat += float(sigma_chosen) ** 2


def acq_mes(mu, sigma, max_samples: np.ndarray):
    """Max-value entropy-search score averaged over sampled maxima.

    Zero when sigma <= 0 (a deterministic point carries no information about
    the max).
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    ys = np.asarray(max_samples, dtype=float)
    scalar = mu.ndim == 0
    mu2, sig2 = np.atleast_1d(mu), np.atleast_1d(sigma)
    out = np.zeros_like(mu2)
    ok = sig2 > 0.0
    if np.any(ok):
        g = (ys[None, :] - mu2[ok, None]) / sig2[ok, None]
        log_phi = -0.5 * g * g - 0.5 * math.log(2.0 * math.pi)
        log_cdf = log_ndtr(g)
        term = g * np.exp(log_phi - math.log(2.0) - log_cdf) - log_cdf
        out[ok] = term.mean(axis=1)
    return float(out[0]) if scalar else out


def gumbel_max_samples(post: Posterior, k: int, rng: np.random.Generator) -> np.ndarray:
    """Approximate draws of the grid max via a Gumbel fit to its CDF.

    The CDF F(y) = prod_n Phi((y - mu_n)/sigma_n) is matched at the 0.25 and
    0.75 quantiles (bisection); samples are clamped to at least the max
    posterior mean.
    """
    if k < 1:
        raise ValueError("need k >= 1")
    mu = post.mean
    sig = np.maximum(post.std, 1e-12)
    top = float(np.max(mu))
    if float(np.max(post.std)) <= 0.0:
        return np.full(k, top)

    def log_f(y: float) -> float:
        return float(np.sum(log_ndtr((y - mu) / sig)))

    lo = float(np.min(mu) - 6.0 * np.max(sig))
    hi = float(np.max(mu) + 6.0 * np.max(sig))
    span = hi - lo

    def quantile(p: float) -> float:
        target = math.log(p)
        a, b = lo, hi
        fa, fb = log_f(a) - target, log_f(b) - target
        grow = 0
        while fa > 0.0 or fb < 0.0:
            if fa > 0.0:
                a -= span
                fa = log_f(a) - target
            if fb < 0.0:
                b += span
                fb = log_f(b) - target
            grow += 1
            if grow > 100:
                raise NumericalError("could not bracket the max-CDF quantile")
        for _ in range(100):
            mid = 0.5 * (a + b)
            if log_f(mid) - target <= 0.0:
                a = mid
            else:
                b = mid
            if b - a <= 1e-12 * max(1.0, abs(a) + abs(b)):
                return 0.5 * (a + b)
        raise NumericalError("max-CDF quantile bisection did not converge")

    y25 = quantile(0.25)
    y75 = quantile(0.75)
    # Gumbel quantile y(p) = a - b log(-log p)
    c25 = math.log(-math.log(0.25))
    c75 = math.log(-math.log(0.75))
    b_scale = max((y75 - y25) / (c25 - c75), 1e-300)
    a_loc = y25 + b_scale * c25
    u = rng.uniform(size=k)
    u = np.clip(u, 1e-16, 1.0 - 1e-16)
    samples = a_loc - b_scale * np.log(-np.log(u))
    return np.maximum(samples, top)


# ---------------------------------------------------------------------------
# max search
# ---------------------------------------------------------------------------

def max_search_step(
    model: GPModel,
    data: Dataset,
    policy: MaxPolicy,
    grid,
    state: AcquisitionState,
    quad: QuadratureRule | None = None,
) -> int:
    """Choose the next query's grid index under the given policy.

    Dependence-driven kinds draw n_draws joint samples, record each draw's
    max value (or argmax location for the *_x variants) and score every grid
    point's draw column against that target; analytic kinds evaluate their
    closed form; random/var_max are the two naive baselines.  Exact score
    ties are broken uniformly at random.
    """
    g = np.asarray(grid, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    n = g.shape[0]
    if n == 0:
        raise ValueError("empty grid")
    if data.records:
        state.incumbent_best = float(np.max(data.values()))

    if policy.kind == "random":
        state.step += 1
        return int(state.rng.integers(n))

    tuned = model
    if len(data.records) >= 2:
        tuned = _tune(model, data, state, policy.hyper_budget, quad)
    post = fit_posterior(tuned, data, g, quad=quad)
    state.posterior = post

    if policy.kind == "var_max":
        scores = np.diag(post.cov)
    elif policy.kind in ("gp_dcor", "gp_dcov", "gp_dcor_x", "gp_dcov_x", "gp_mis"):
        draws = sample_posterior(post, policy.n_draws, state.rng)
        argmax_cols = np.argmax(draws.values, axis=1)
        if policy.kind.endswith("_x"):
            target = g[argmax_cols]
            if target.shape[1] == 1:
                target = target[:, 0]
        else:
            target = draws.values[np.arange(policy.n_draws), argmax_cols]
        if policy.kind == "gp_mis":
            scores = np.array(
                [mi_knn(draws.values[:, i], target) for i in range(n)]
            )
        else:
            stat = "dcov" if policy.kind.startswith("gp_dcov") else "dcor"
            scores = _dep_columns(draws.values, target, policy.alpha, stat)
    else:
        mu, sig = post.mean, post.std
        if policy.kind == "pi":
            scores = acq_pi(mu, sig, state.incumbent_best, policy.xi)
        elif policy.kind == "ei":
            scores = acq_ei(mu, sig, state.incumbent_best)
        elif policy.kind == "gp_ucb":
            scores = acq_ucb(mu, sig, max(state.step, 1), g.shape[1],
                             policy.nu, policy.delta_ucb)
        elif policy.kind == "gp_mi":
            scores = acq_gpmi(mu, sig, state.gamma_hat, policy.delta_mi)
        elif policy.kind == "mes":
            ys = gumbel_max_samples(post, policy.k_mes, state.rng)
            scores = acq_mes(mu, sig, ys)
        else:  # pragma: no cover - guarded by MaxPolicy validation
            raise ValueError(f"unhandled policy kind {policy.kind!r}")

    idx = _argmax_tied(scores, state.rng)
    if policy.kind == "gp_mi":
        update_gamma(state, math.sqrt(max(post.cov[idx, idx], 0.0)))
    state.scores = np.asarray(scores, dtype=float)
    state.step += 1
    return idx
