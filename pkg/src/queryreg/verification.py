"""Named verification checks shared by the CLI and the acceptance suite.

Each suite returns ``CheckResult`` rows; a check passes when its statistic
stays at or below its threshold.  Statistical checks use five standard
errors of slack so verdicts are stable across seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import moments
from .config import DesignSpec
from .learner import exp_gap, update_step
from .linalg import spectral_norm_power_iteration
from .oracle import (
    QuerySession,
    RegressionInstance,
    conditional_covariance,
    one_query_adapter,
    one_query_map_back,
)
from .rng import RngStream
from .var_dynamics import var_decompose

__all__ = [
    "CheckResult",
    "moments_suite",
    "recursion_suite",
    "querydist_suite",
    "all_suites",
    "REPORT_HEADER",
]

REPORT_HEADER = ["check_name", "statistic", "threshold", "pass"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    threshold: float
    passed: bool

    def row(self):
        return (self.name, self.statistic, self.threshold, self.passed)


def _check(name, statistic, threshold):
    return CheckResult(name=name, statistic=float(statistic), threshold=float(threshold),
                       passed=bool(statistic <= threshold))


# ---------------------------------------------------------------------------
# moments suite
# ---------------------------------------------------------------------------


def moment_grid_checks(n_grid=50):
    """Exact moment properties on a grid of half-widths in (0, 1]."""
    grid = [(i + 1) / n_grid for i in range(n_grid)]
    worst_lower = max(a**2 / 11 - moments.mu(a) for a in grid)
    worst_upper = max(moments.mu(a) - a**2 for a in grid)
    worst_c02 = max(moments.c_rq(0, 2, a) - 3 * moments.mu(a) for a in grid)
    worst_cr2 = max(
        moments.c_rq(r, 2, a) - 3 * a ** (r + 2) for a in grid for r in (0, 2, 4)
    )
    worst_odd = max(
        abs(moments.c_rq(r, q, a))
        for a in grid
        for (r, q) in ((1, 0), (3, 0), (0, 1), (2, 1), (1, 2), (3, 2))
    )
    return [
        _check("mu_lower_bound", worst_lower, 0.0),
        _check("mu_upper_bound", worst_upper, 0.0),
        _check("c02_vs_mu_bound", worst_c02, 0.0),
        _check("cr2_bound", worst_cr2, 0.0),
        _check("odd_moment_parity", worst_odd, 1e-14),
    ]


def closed_form_vs_mc_checks(rng, dims=(2, 4), half_widths=(0.25, 0.5), n=1_000_000):
    """Interaction-matrix closed forms against their Monte Carlo oracles."""
    results = []
    for d in dims:
        for a in half_widths:
            x = rng.standard_normal(d)
            v = moments.v_matrix(x, a)
            mc_v = moments.mc_v_matrix(x, a, n, rng)
            dev_v = np.max(np.abs(v - mc_v.mean) / np.maximum(mc_v.stderr, 1e-300))
            results.append(_check(f"v_matrix_vs_mc_d{d}_a{a}", dev_v, 5.0))
            w = moments.w_integrand(x, a)
            mc_w = moments.mc_w_integrand(x, a, n, rng)
            dev_w = np.max(np.abs(w - mc_w.mean) / np.maximum(mc_w.stderr, 1e-300))
            results.append(_check(f"w_integrand_vs_mc_d{d}_a{a}", dev_w, 5.0))
    return results


def spectral_bound_suite(rng, dims=(2, 4, 8), half_widths=(0.25, 0.5), n_x=200_000):
    """The three identity-domination bounds on Monte Carlo estimates."""
    design = DesignSpec()
    results = []
    for d in dims:
        for a in half_widths:
            for name, stat, thr, ok in moments.spectral_bound_checks(a, d, design, n_x, rng):
                results.append(CheckResult(f"{name}_d{d}_a{a}", stat, thr, ok))
    return results


def rank_one_norm_checks(rng, n_pairs=1000, d=6):
    """Spectral norm of an outer product equals the product of the norms."""
    worst = 0.0
    for _ in range(n_pairs):
        a = rng.standard_normal(d)
        b = rng.standard_normal(d)
        norm = spectral_norm_power_iteration(np.outer(a, b))
        worst = max(worst, abs(norm - np.linalg.norm(a) * np.linalg.norm(b)))
    return [_check("rank_one_spectral_norm", worst, 1e-8)]


def sym_kl_checks(rng, n_cases=1000, dim=2):
    """Symmetrized-KL inequality on random admissible matrix quadruples."""
    worst_gap = -math.inf
    zero_case = None
    produced = 0
    attempts = 0
    while produced < n_cases:
        attempts += 1
        if attempts > 100 * n_cases:
            raise RuntimeError("failed to generate admissible quadruples")
        base = rng.standard_normal((dim, dim))
        s0 = base @ base.T + 0.1 * np.eye(dim)
        pert = rng.standard_normal((dim, dim))
        s1 = s0 + 0.5 * (pert @ pert.T)
        lam0 = 0.5 * np.diag(np.diag(s0))
        lam1 = 0.5 * np.diag(np.diag(s1))
        # admissibility: covariance dominates its halved diagonal part
        if np.linalg.eigvalsh(s0 - lam0)[0] < 0 or np.linalg.eigvalsh(s1 - lam1)[0] < 0:
            continue
        produced += 1
        kl = moments.sym_kl_gaussians(s0, s1)
        bound = moments.sym_kl_bound(s0, s1, lam0, lam1)
        worst_gap = max(worst_gap, kl - bound)
        if zero_case is None:
            zero_case = abs(moments.sym_kl_gaussians(s0, s0))
    return [
        _check("sym_kl_bound_holds", worst_gap, 1e-12),
        _check("sym_kl_equal_matrices_zero", zero_case, 1e-10),
    ]


def moments_suite(seed=0):
    rng = RngStream(seed, 0).child(100)
    results = []
    results += moment_grid_checks()
    results += closed_form_vs_mc_checks(rng)
    results += spectral_bound_suite(rng)
    results += rank_one_norm_checks(rng)
    results += sym_kl_checks(rng)
    return results


# ---------------------------------------------------------------------------
# recursion suite
# ---------------------------------------------------------------------------


def var_identity_checks(rng, n_cases=1000, d=4):
    """Autoregressive reconstruction equals the direct update exactly."""
    worst = 0.0
    for _ in range(n_cases):
        theta = rng.standard_normal(d)
        theta_star = rng.standard_normal(d)
        x = rng.standard_normal(d)
        eps = float(rng.standard_normal())
        a = 0.3
        u = rng.uniform(-a, a, d)
        u_prime = rng.uniform(-a, a, d)
        alpha = float(10.0 ** rng.uniform(-4, -1))
        y = float(x @ theta_star) + eps
        z = y - float(x @ (theta + u))
        z_prime = y - float(x @ (theta + u_prime))
        direct = update_step(theta, u, u_prime, z, z_prime, alpha) - theta_star
        step = var_decompose(theta, theta_star, x, eps, u, u_prime, alpha)
        scale = max(float(np.max(np.abs(direct))), 1e-30)
        worst = max(worst, float(np.max(np.abs(step.error_next - direct))) / scale)
    return [_check("var_reconstruction_identity", worst, 1e-10)]


def var_moment_checks(rng, d=3, n=1_000_000, alpha=0.01, half_width=0.4, sigma=1.0,
                      chunk=100_000):
    """Monte Carlo means of the innovation and the transition matrix.

    The innovation is centered; the transition matrix has mean
    I - 2 alpha mu Q (standard-normal covariates, so Q = I).
    """
    mu_val = moments.mu(half_width)
    target_g = np.eye(d) - 2.0 * alpha * mu_val * np.eye(d)
    s1_xi = np.zeros(d)
    s2_xi = np.zeros(d)
    s1_g = np.zeros((d, d))
    s2_g = np.zeros((d, d))
    done = 0
    while done < n:
        m = min(chunk, n - done)
        x = rng.standard_normal((m, d))
        eps = sigma * rng.standard_normal(m)
        u = rng.uniform(-half_width, half_width, (m, d))
        u_prime = rng.uniform(-half_width, half_width, (m, d))
        gap = exp_gap(u)
        direction = ((u_prime - u) * x).sum(axis=1)
        xi = (2.0 * alpha * eps * direction)[:, None] * gap
        xi += (alpha * ((u * x).sum(axis=1) ** 2 - (u_prime * x).sum(axis=1) ** 2))[:, None] * gap
        s1_xi += xi.sum(axis=0)
        s2_xi += (xi**2).sum(axis=0)
        g = -2.0 * alpha * direction[:, None, None] * (gap[:, :, None] * x[:, None, :])
        g += np.eye(d)
        s1_g += g.sum(axis=0)
        s2_g += (g**2).sum(axis=0)
        done += m
    mean_xi = s1_xi / n
    se_xi = np.sqrt(np.maximum(s2_xi / n - mean_xi**2, 0.0) / (n - 1))
    mean_g = s1_g / n
    se_g = np.sqrt(np.maximum(s2_g / n - mean_g**2, 0.0) / (n - 1))
    dev_xi = np.max(np.abs(mean_xi) / np.maximum(se_xi, 1e-300))
    dev_g = np.max(np.abs(mean_g - target_g) / np.maximum(se_g, 1e-300))
    return [
        _check("innovation_mean_centered", dev_xi, 5.0),
        _check("transition_mean_matches", dev_g, 5.0),
    ]


def simulate_error_second_moment(theta_star, alpha, half_width, sigma, n_steps, n_rep, rng,
                                 chunk=50_000):
    """Brute-force oracle: empirical error second-moment matrices, one per step.

    Simulates ``n_rep`` independent learner replicates from theta0 = 0 in
    lockstep at a fixed learning rate and returns per-step (mean, stderr)
    pairs of the outer error products.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    d = theta_star.size
    sums = [np.zeros((d, d)) for _ in range(n_steps)]
    sumsqs = [np.zeros((d, d)) for _ in range(n_steps)]
    done = 0
    while done < n_rep:
        m = min(chunk, n_rep - done)
        err = np.tile(-theta_star, (m, 1))
        for step in range(n_steps):
            x = rng.standard_normal((m, d))
            eps = sigma * rng.standard_normal(m)
            u = rng.uniform(-half_width, half_width, (m, d))
            u_prime = rng.uniform(-half_width, half_width, (m, d))
            resid = eps - (x * err).sum(axis=1)
            z = resid - (x * u).sum(axis=1)
            z_prime = resid - (x * u_prime).sum(axis=1)
            err = err + (alpha * (z**2 - z_prime**2))[:, None] * exp_gap(u)
            outer = err[:, :, None] * err[:, None, :]
            sums[step] += outer.sum(axis=0)
            sumsqs[step] += (outer**2).sum(axis=0)
        done += m
    out = []
    for step in range(n_steps):
        mean = sums[step] / n_rep
        var = np.maximum(sumsqs[step] / n_rep - mean**2, 0.0) * (n_rep / (n_rep - 1))
        out.append((mean, np.sqrt(var / n_rep)))
    return out


def recursion_vs_simulation_checks(rng, d=3, alpha=1e-3, half_width=0.3, sigma=1.0,
                                   n_steps=5, n_rep=200_000, n_x=400_000, tol=4.0):
    """The exact recursion against the brute-force replicate simulation."""
    theta_star = np.array([0.8, -0.4, 0.2]) if d == 3 else rng.standard_normal(d)
    design = DesignSpec()
    empirical = simulate_error_second_moment(
        theta_star, alpha, half_width, sigma, n_steps, n_rep, rng.child(1)
    )
    s = np.outer(theta_star, theta_star)
    se_rec = np.zeros((d, d))
    results = []
    for step in range(1, n_steps + 1):
        res = moments.sk_step(s, alpha, half_width, sigma, design, d, n_x, rng.child(step + 1))
        s = res.s_next
        se_rec = np.sqrt(se_rec**2 + res.stderr**2)
        emp_mean, emp_se = empirical[step - 1]
        combined = np.sqrt(emp_se**2 + se_rec**2)
        dev = np.max(np.abs(emp_mean - s) / np.maximum(combined, 1e-300))
        results.append(_check(f"recursion_vs_bruteforce_step{step}", dev, tol))
    return results


def recursion_degenerate_checks(rng, d=3, half_width=0.3):
    """alpha = 0 keeps the matrix fixed; sigma = 0 from zero error leaves only
    the quadratic-noise term."""
    design = DesignSpec()
    s_prev = np.outer(np.arange(1.0, d + 1), np.arange(1.0, d + 1)) + np.eye(d)
    frozen = moments.sk_step(s_prev, 0.0, half_width, 1.0, design, d, 2000, rng.child(7))
    dev_frozen = float(np.max(np.abs(frozen.s_next - s_prev)))
    alpha = 0.05
    pure = moments.sk_step(np.zeros((d, d)), alpha, half_width, 0.0, design, d, 2000, rng.child(8))
    dev_pure = float(np.max(np.abs(pure.s_next - alpha**2 * pure.w.mean)))
    return [
        _check("recursion_identity_at_zero_rate", dev_frozen, 0.0),
        _check("recursion_pure_noise_floor", dev_pure, 1e-15),
    ]


def recursion_suite(seed=0):
    rng = RngStream(seed, 0).child(200)
    results = []
    results += var_identity_checks(rng.child(0))
    results += var_moment_checks(rng.child(1))
    results += recursion_vs_simulation_checks(rng.child(2))
    results += recursion_degenerate_checks(rng.child(3))
    return results


# ---------------------------------------------------------------------------
# query-distribution suite
# ---------------------------------------------------------------------------


def _fixed_instance(theta_star, sigma):
    theta_star = np.asarray(theta_star, dtype=float)
    design = DesignSpec()
    return RegressionInstance(
        theta_star=theta_star, sigma=sigma, design=design, q=np.eye(theta_star.size)
    )


def query_law_checks(rng, d=4, sigma=0.7, n=1_000_000, n_cases=5, chunk=200_000):
    """Empirical response covariance in the transformed protocol against the
    exact bivariate law, at random parameter/query combinations."""
    results = []
    for case in range(n_cases):
        theta_star = rng.standard_normal(d)
        v = rng.standard_normal(d)
        v_prime = rng.standard_normal(d)
        instance = _fixed_instance(theta_star, sigma)
        session = QuerySession(instance, rng.child(10 + case), protocol="transformed")
        target = conditional_covariance(theta_star, v, v_prime, sigma)
        s1 = np.zeros((2, 2))
        s2 = np.zeros((2, 2))
        done = 0
        while done < n:
            m = min(chunk, n - done)
            z, z_prime = session.query_pair_block(v, v_prime, m)
            pair = np.stack([z, z_prime], axis=1)
            prods = pair[:, :, None] * pair[:, None, :]
            s1 += prods.sum(axis=0)
            s2 += (prods**2).sum(axis=0)
            done += m
        mean = s1 / n
        se = np.sqrt(np.maximum(s2 / n - mean**2, 0.0) / (n - 1))
        dev = np.max(np.abs(mean - target) / np.maximum(se, 1e-300))
        results.append(_check(f"query_pair_law_case{case}", dev, 5.0))
    return results


def adapter_checks(rng, d=5, sigma=0.5, n_rounds=1000):
    """The one-query adapter's algebraic identities, on latent test-mode rounds."""
    theta_star = rng.standard_normal(d)
    instance = _fixed_instance(theta_star, sigma)
    session = QuerySession(instance, rng.child(42), expose_latents=True)
    worst = 0.0
    worst_round_trip = 0.0
    for i in range(n_rounds):
        w = rng.standard_normal(d)
        w_prime = rng.standard_normal(d)
        v, v_prime = one_query_adapter(w, w_prime)
        z, z_prime = session.query_pair(v, v_prime)
        resp, resp_prime = one_query_map_back(z, z_prime)
        latent = session.latents[i]
        y = float(latent.x @ theta_star) + latent.eps
        worst = max(worst, abs(resp - (y - float(latent.x @ w))))
        worst = max(worst, abs(resp_prime - float(latent.x @ w_prime)))
        vv, vvp = one_query_adapter(*one_query_adapter(w, w_prime))
        worst_round_trip = max(
            worst_round_trip,
            float(np.max(np.abs(vv / 2.0 - w))),
            float(np.max(np.abs(vvp / 2.0 - w_prime))),
        )
    return [
        _check("adapter_response_identities", worst, 1e-12),
        _check("adapter_round_trip", worst_round_trip, 1e-12),
    ]


def uniform_box_checks(rng, d=3, half_width=0.5, n=1_000_000):
    """Support, mean and second moment of the box noise, plus the mixed
    moment that defines the contraction coefficient."""
    draws = rng.uniform(-half_width, half_width, (n, d))
    support_excess = float(np.max(np.abs(draws)) - half_width)
    mean = draws.mean(axis=0)
    se_mean = draws.std(axis=0, ddof=1) / math.sqrt(n)
    dev_mean = float(np.max(np.abs(mean) / se_mean))
    second = draws**2
    dev_second = float(
        np.max(np.abs(second.mean(axis=0) - half_width**2 / 3)
               / (second.std(axis=0, ddof=1) / math.sqrt(n)))
    )
    mixed = draws * exp_gap(draws)
    dev_mixed = float(
        np.max(np.abs(mixed.mean(axis=0) + moments.mu(half_width))
               / (mixed.std(axis=0, ddof=1) / math.sqrt(n)))
    )
    return [
        _check("uniform_box_support", support_excess, 0.0),
        _check("uniform_box_mean", dev_mean, 5.0),
        _check("uniform_box_second_moment", dev_second, 5.0),
        _check("uniform_box_mixed_moment", dev_mixed, 5.0),
    ]


def querydist_suite(seed=0):
    rng = RngStream(seed, 0).child(300)
    results = []
    results += query_law_checks(rng.child(0))
    results += adapter_checks(rng.child(1))
    results += uniform_box_checks(rng.child(2))
    return results


def all_suites(seed=0):
    return moments_suite(seed) + recursion_suite(seed) + querydist_suite(seed)
