"""Experiment orchestration: adaptive and non-adaptive runs, rate fits, CSV.

Replicates run in lockstep as (replicate, coordinate) arrays for speed, but
every replicate owns its pair of random streams keyed by the replicate
index, so results are independent of execution order and identical to
running the replicates one at a time through the scalar session interface.

All CSV output goes through one writer with a canonical float formatting,
making byte-identical replays a property of the config and seed alone.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import learner as learner_mod
from .config import realize_theta
from .learner import ScheduleParams, default_box_halfwidth, guarantee_threshold
from .nonadaptive import estimate as nonadaptive_estimate
from .nonadaptive import plan as nonadaptive_plan
from .nonadaptive import risk_bound, run_queries
from .oracle import QuerySession, new_instance, reveal_truth
from .rng import RngStream

__all__ = [
    "excess_risk",
    "RateFit",
    "fit_rate",
    "geometric_log_points",
    "regime_tag",
    "burn_in_rounds",
    "schedule_from_config",
    "box_halfwidth_from_config",
    "AdaptiveResult",
    "run_adaptive",
    "NonadaptiveResult",
    "run_nonadaptive",
    "GapResult",
    "run_gap_experiment",
    "write_csv",
    "TRAJECTORY_HEADER",
    "SUMMARY_HEADER",
    "NONADAPTIVE_HEADER",
    "SWEEP_HEADER",
]

DIVERGENCE_FACTOR = 1e6

TRAJECTORY_HEADER = ["replicate", "k", "sq_error", "excess_risk", "regime"]
SUMMARY_HEADER = ["k", "mean_sq_error", "stderr", "n", "regime"]
NONADAPTIVE_HEADER = ["replicate", "mode", "sq_error", "bound"]
SWEEP_HEADER = ["d", "k", "strategy", "mean_risk", "stderr", "n", "regime"]


def excess_risk(theta_hat, theta_star, q):
    """Prediction-risk gap (theta_hat - theta_star)^T Q (theta_hat - theta_star)."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    q = np.asarray(q, dtype=float)
    if theta_hat.shape != theta_star.shape or q.shape != (theta_hat.size, theta_hat.size):
        raise ValueError("dimension mismatch in excess_risk")
    err = theta_hat - theta_star
    return float(err @ q @ err)


@dataclass(frozen=True)
class RateFit:
    """Ordinary least squares on (log x, log y)."""

    slope: float
    intercept: float
    stderr: float
    r_squared: float
    n: int


def fit_rate(points):
    """Fit a power law y ~ c x^slope by OLS on the logs of the points."""
    points = [(float(x), float(y)) for x, y in points]
    if len(points) < 3:
        raise ValueError(f"need at least 3 points for a rate fit, got {len(points)}")
    if any(x <= 0 or y <= 0 for x, y in points):
        raise ValueError("rate fits need strictly positive coordinates")
    lx = np.log([p[0] for p in points])
    ly = np.log([p[1] for p in points])
    n = len(points)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    if sxx == 0.0:
        raise ValueError("all x values coincide; slope is undefined")
    slope = float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    rss = float(np.sum(resid**2))
    tss = float(np.sum((ly - ly.mean()) ** 2))
    stderr = math.sqrt(rss / (n - 2) / sxx) if n > 2 else float("nan")
    r_squared = 1.0 if tss == 0.0 else 1.0 - rss / tss
    return RateFit(slope=slope, intercept=intercept, stderr=stderr, r_squared=r_squared, n=n)


def geometric_log_points(k_max, factor=1.3, extra=()):
    """Round indices spaced by ~``factor``, always including 1 and k_max."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    points = {1, k_max}
    value = 1.0
    while value < k_max:
        value *= factor
        points.add(min(int(round(value)), k_max))
    points.update(int(v) for v in extra if 1 <= int(v) <= k_max)
    return sorted(points)


def schedule_from_config(config):
    return ScheduleParams(
        d=config.d,
        sigma=config.sigma,
        lambda_min=config.lambda_min_effective,
        m4=config.m4_effective,
        b_override=config.b_override,
        alpha_override=config.alpha_override,
    )


def box_halfwidth_from_config(config):
    if config.a_override is not None:
        return config.a_override
    return default_box_halfwidth(config.sigma, config.d)


def regime_tag(schedule, k):
    """Tag a logged round: the convergence guarantee needs d >= 9, an
    unmodified schedule, and k past the guarantee threshold."""
    if schedule.overridden or schedule.d < 9:
        return "outside-theorem-regime"
    if k <= guarantee_threshold(schedule):
        return "outside-theorem-regime"
    return "theorem"


def burn_in_rounds(schedule):
    """Rounds discarded before slope fits: twice the guarantee threshold of
    the schedule actually in force (overrides included)."""
    return 2.0 * guarantee_threshold(schedule)


# ---------------------------------------------------------------------------
# adaptive runs
# ---------------------------------------------------------------------------


@dataclass
class AdaptiveResult:
    """Lockstep adaptive run over all replicates of one config."""

    config: object
    schedule: ScheduleParams
    half_width: float
    log_ks: list
    sq_error: np.ndarray  # (n_logs, replicates), NaN after divergence
    excess: np.ndarray  # same layout
    diverged: np.ndarray  # (replicates,) bool
    diverged_at: np.ndarray  # (replicates,) round index or 0

    @property
    def n_diverged(self):
        return int(self.diverged.sum())

    def regimes(self):
        return [regime_tag(self.schedule, k) for k in self.log_ks]

    def mean_sq_error(self):
        """Per logged round: mean/stderr over non-diverged replicates."""
        alive = ~self.diverged
        rows = []
        for i, k in enumerate(self.log_ks):
            vals = self.sq_error[i, alive]
            vals = vals[np.isfinite(vals)]
            n = vals.size
            mean = float(vals.mean()) if n else float("nan")
            stderr = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
            rows.append((k, mean, stderr, n))
        return rows

    def trajectory_rows(self):
        rows = []
        regimes = self.regimes()
        for r in range(self.sq_error.shape[1]):
            for i, k in enumerate(self.log_ks):
                if not np.isfinite(self.sq_error[i, r]):
                    continue
                rows.append((r, k, self.sq_error[i, r], self.excess[i, r], regimes[i]))
        return rows

    def summary_rows(self):
        regimes = self.regimes()
        return [
            (k, mean, stderr, n, regimes[i])
            for i, (k, mean, stderr, n) in enumerate(self.mean_sq_error())
        ]


def run_adaptive(config, log_points=None, chunk=2048):
    """Run the zeroth-order learner for every replicate of a config.

    Per replicate: a fresh hidden instance, a fresh learner started at the
    configured theta0, and ``config.k`` propose/query/update rounds.  Errors
    are logged at geometrically spaced rounds (or at ``log_points``).  A
    replicate whose iterate norm passes 1e6 * max(R, 1) is marked diverged,
    frozen, and excluded from aggregates.
    """
    d = config.d
    nrep = config.replicates
    schedule = schedule_from_config(config)
    half_width = box_halfwidth_from_config(config)
    if config.k < 1:
        raise ValueError("adaptive runs need k >= 1")
    raw_points = log_points if log_points is not None else geometric_log_points(config.k)
    log_ks = sorted({int(k) for k in raw_points})
    log_set = set(log_ks)
    if log_ks[-1] > config.k or log_ks[0] < 1:
        raise ValueError("log points must lie in [1, k]")

    scale = config.design.scale_vector(d)
    q_diag = np.diag(config.design.q_matrix(d))
    guard = DIVERGENCE_FACTOR * max(config.R, 1.0)
    guard_sq = guard * guard

    oracle_rngs = []
    learner_rngs = []
    theta_star = np.empty((nrep, d))
    for r in range(nrep):
        root = RngStream(config.seed, r)
        orng, lrng = root.child(0), root.child(1)
        theta_star[r] = realize_theta(config.theta_star, d, orng)
        oracle_rngs.append(orng)
        learner_rngs.append(lrng)
    theta = np.tile(realize_theta(config.theta0, d, RngStream(config.seed, 2**32)), (nrep, 1))

    n_logs = len(log_ks)
    sq_log = np.full((n_logs, nrep), np.nan)
    ex_log = np.full((n_logs, nrep), np.nan)
    diverged = np.zeros(nrep, dtype=bool)
    diverged_at = np.zeros(nrep, dtype=np.int64)
    log_index = {k: i for i, k in enumerate(log_ks)}

    prop_cols = d if config.antithetic else 2 * d
    done = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while done < config.k:
            m = min(chunk, config.k - done)
            lat = np.empty((nrep, m, d + 1))
            prop = np.empty((nrep, m, prop_cols))
            for r in range(nrep):
                lat[r] = oracle_rngs[r].standard_normal((m, d + 1))
                prop[r] = learner_rngs[r].uniform(-half_width, half_width, (m, prop_cols))
            lat = np.ascontiguousarray(lat.transpose(1, 0, 2))
            prop = np.ascontiguousarray(prop.transpose(1, 0, 2))
            ks = np.arange(done + 1, done + m + 1)
            alphas = np.broadcast_to(
                np.asarray(learner_mod.learning_rate(ks, schedule, half_width)), (m,)
            )

            for c in range(m):
                u = prop[c, :, :d]
                u_prime = -u if config.antithetic else prop[c, :, d:]
                x = lat[c, :, :d] * scale
                eps = config.sigma * lat[c, :, d]
                resid = np.einsum("nd,nd->n", x, theta_star - theta) + eps
                xu = np.einsum("nd,nd->n", x, u)
                xup = np.einsum("nd,nd->n", x, u_prime)
                z = resid - xu
                z_prime = resid - xup
                coeff = alphas[c] * (z**2 - z_prime**2)
                theta = theta + coeff[:, None] * learner_mod.exp_gap(u)

                k_now = done + c + 1
                norms = np.einsum("nd,nd->n", theta, theta)
                fresh = (~diverged) & (~np.isfinite(norms) | (norms > guard_sq))
                if fresh.any():
                    diverged_at[fresh] = k_now
                    diverged |= fresh
                    theta[fresh] = 0.0  # park; excluded from all aggregates
                if k_now in log_set:
                    i = log_index[k_now]
                    err = theta - theta_star
                    sq = np.einsum("nd,nd->n", err, err)
                    ex = np.einsum("nd,d,nd->n", err, q_diag, err)
                    alive = ~diverged
                    sq_log[i, alive] = sq[alive]
                    ex_log[i, alive] = ex[alive]
            done += m

    return AdaptiveResult(
        config=config,
        schedule=schedule,
        half_width=half_width,
        log_ks=log_ks,
        sq_error=sq_log,
        excess=ex_log,
        diverged=diverged,
        diverged_at=diverged_at,
    )


def replay_adaptive_replicate(config, replicate, audit=False):
    """Re-run one replicate through the scalar session interface.

    Uses the same per-replicate streams as :func:`run_adaptive`, so the
    trajectory replays the lockstep run draw for draw.  Returns
    (learner_state, session, theta_star).
    """
    root = RngStream(config.seed, replicate)
    orng, lrng = root.child(0), root.child(1)
    instance = new_instance(config, orng)
    session = QuerySession(instance, orng, protocol="standard", audit=audit)
    schedule = schedule_from_config(config)
    half_width = box_halfwidth_from_config(config)
    theta0 = realize_theta(config.theta0, config.d, RngStream(config.seed, 2**32))
    state = learner_mod.init_learner(
        config.d, half_width, schedule, theta0=theta0, antithetic=config.antithetic
    )
    for k in range(1, config.k + 1):
        v, v_prime, _, _ = learner_mod.propose_queries(state, lrng)
        z, z_prime = session.query_pair(v, v_prime)
        alpha = learner_mod.learning_rate(k, schedule, half_width)
        learner_mod.apply_update(state, z, z_prime, float(alpha))
    return state, session, instance.theta_star


# ---------------------------------------------------------------------------
# non-adaptive runs
# ---------------------------------------------------------------------------


@dataclass
class NonadaptiveResult:
    config: object
    mode: str
    rows: list  # (replicate, mode, sq_error, bound)
    bound: float
    estimates: np.ndarray | None = None  # (replicates, d) when collected
    theta_stars: np.ndarray | None = None

    def mean_risk(self):
        vals = np.array([row[2] for row in self.rows])
        n = vals.size
        stderr = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return float(vals.mean()), stderr, n


def run_nonadaptive(config, mode="oracle", collect_estimates=False):
    """Run the block estimator for every replicate of a config.

    ``oracle`` mode consumes the true squared parameter norm, matching the
    construction whose risk guarantee is tested.  ``plugin`` mode spends the
    first ceil(k/10) rounds querying the zero vector to estimate it and
    carries no guarantee; its rows are labeled distinctly.
    """
    if mode not in ("oracle", "plugin"):
        raise ValueError(f"unknown non-adaptive mode {mode!r}")
    bound = risk_bound(config.k, config.d, config.R, config.sigma)
    rows = []
    estimates = np.empty((config.replicates, config.d)) if collect_estimates else None
    theta_stars = np.empty((config.replicates, config.d)) if collect_estimates else None
    for r in range(config.replicates):
        root = RngStream(config.seed, r)
        orng = root.child(0)
        instance = new_instance(config, orng)
        session = QuerySession(instance, orng, protocol="standard")
        theta_star, sigma, _ = reveal_truth(instance)

        if mode == "oracle":
            plan_ = nonadaptive_plan(config.k, config.d, config.R, config.sigma)
            norm_sq = float(theta_star @ theta_star)
        else:
            pilot = math.ceil(config.k / 10)
            z0 = session.query_single_block(np.zeros(config.d), pilot)
            norm_sq = max(float(np.mean(z0**2)) - sigma**2, 0.0)
            plan_ = nonadaptive_plan(config.k - pilot, config.d, config.R, config.sigma)

        samples = run_queries(plan_, session)
        est = nonadaptive_estimate(plan_, samples, config.R, config.sigma, norm_sq)
        sq = float(np.sum((est.theta_hat - theta_star) ** 2))
        label = plan_.mode if mode == "oracle" else f"{plan_.mode}-plugin"
        rows.append((r, label, sq, bound))
        if collect_estimates:
            estimates[r] = est.theta_hat
            theta_stars[r] = theta_star
    return NonadaptiveResult(
        config=config, mode=mode, rows=rows, bound=bound,
        estimates=estimates, theta_stars=theta_stars,
    )


# ---------------------------------------------------------------------------
# adaptive vs non-adaptive gap experiment
# ---------------------------------------------------------------------------


@dataclass
class GapResult:
    dims: list
    k_levels: list
    sweep_rows: list  # (d, k, strategy, mean_risk, stderr, n, regime)
    adaptive_exponent: RateFit
    nonadaptive_exponent: RateFit
    n_diverged: int = 0
    n_replicates: int = 0

    @property
    def separation(self):
        return self.nonadaptive_exponent.slope - self.adaptive_exponent.slope


def _gap_config(config, d, k):
    radius = math.sqrt(d)
    return config.with_updates(
        d=d,
        R=radius,
        k=int(k),
        theta_star=f"sphere:{radius!r}",
        lambda_min=None,
        m4=None,
    )


def run_gap_experiment(config, dims=(8, 16, 32), k_levels=None, level_factors=(1.0, 1.5, 2.25),
                       base_multiplier=3.0, nonadaptive_replicates=None):
    """Measure how the risk of both strategies scales with dimension.

    All dimensions share the same round budgets (matched k), chosen well
    past the guarantee threshold of the largest dimension so every
    adaptive cell sits in its 1/k regime.  The dimension exponent per
    strategy is fitted by pooled OLS of log(k * mean_risk) against log d
    over all (d, k) cells.  Non-adaptive cells are cheap, so they may use
    their own (larger) replicate count.
    """
    dims = sorted(int(d) for d in dims)
    if config.sigma != 1.0:
        raise ValueError("the gap experiment is defined for sigma = 1")
    if k_levels is None:
        worst = max(
            guarantee_threshold(schedule_from_config(_gap_config(config, d, 1))) for d in dims
        )
        base = base_multiplier * worst
        k_levels = [int(round(base * f)) for f in level_factors]
    k_levels = sorted(int(k) for k in k_levels)
    k_max = k_levels[-1]

    sweep_rows = []
    n_diverged = 0
    n_replicates = 0
    for d in dims:
        cfg = _gap_config(config, d, k_max)
        result = run_adaptive(cfg, log_points=k_levels)
        n_diverged += result.n_diverged
        n_replicates += cfg.replicates
        regimes = result.regimes()
        for i, (k, mean, stderr, n) in enumerate(result.mean_sq_error()):
            sweep_rows.append((d, k, "adaptive", mean, stderr, n, regimes[i]))
        for k in k_levels:
            cfg_k = _gap_config(config, d, k)
            if nonadaptive_replicates is not None:
                cfg_k = cfg_k.with_updates(replicates=int(nonadaptive_replicates))
            na = run_nonadaptive(cfg_k, mode="oracle")
            mean, stderr, n = na.mean_risk()
            sweep_rows.append((d, k, "nonadaptive", mean, stderr, n, na.rows[0][1]))

    def pooled_fit(strategy):
        pts = [
            (row[0], row[1] * row[3])
            for row in sweep_rows
            if row[2] == strategy and np.isfinite(row[3]) and row[3] > 0
        ]
        return fit_rate(pts)

    return GapResult(
        dims=dims,
        k_levels=k_levels,
        sweep_rows=sweep_rows,
        adaptive_exponent=pooled_fit("adaptive"),
        nonadaptive_exponent=pooled_fit("nonadaptive"),
        n_diverged=n_diverged,
        n_replicates=n_replicates,
    )


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    """Write rows with canonical formatting: repr for floats, str otherwise."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])
    return path
