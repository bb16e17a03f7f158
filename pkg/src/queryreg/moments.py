"""Analytic moment layer for the zeroth-order update noise.

The update rule perturbs the iterate with componentwise noise ``U`` uniform
on ``[-A, A]`` and weights the loss difference by ``D = exp(-U) - exp(U)``.
All second-moment dynamics of the estimation error are driven by the mixed
moments

    c(r, q) = E[U^r D^q],

by ``mu = -c(1, 1)``, and by two interaction matrices: ``V(x)``, the
conditional second moment of the noise-direction term at a fixed covariate
``x``, and ``W``, the second moment of the purely quadratic noise term.
This module provides closed forms for all of them, independent Monte Carlo
oracles for cross-checking, the exact one-step recursion of the error
second-moment matrix, and the symmetrized Kullback-Leibler utilities used
by the verification suites.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .linalg import max_eigenvalue, require_symmetric, spectral_norm

__all__ = [
    "c_rq",
    "mu",
    "MomentTable",
    "moment_table",
    "MCMatrix",
    "v_matrix",
    "mc_v_matrix",
    "w_integrand",
    "mc_w_integrand",
    "ev_matrix",
    "ex2_v_matrix",
    "w_matrix",
    "SkStepResult",
    "sk_step",
    "spectral_bound_checks",
    "sym_kl_gaussians",
    "sym_kl_bound",
]

TABLE_ORDERS = ((0, 0), (2, 0), (4, 0), (1, 1), (3, 1), (0, 2), (2, 2), (4, 2))


def _exp_gap(u):
    # exp(-u) - exp(u), computed as a single sinh for accuracy near zero
    return -2.0 * np.sinh(u)


@lru_cache(maxsize=4096)
def _c_rq_cached(r, q, a):
    if (r, q) == (0, 0):
        return 1.0
    if q == 0 and r % 2 == 0:
        # plain uniform moment: A^r / (r + 1)
        return a**r / (r + 1)
    if (r, q) == (1, 1):
        return -mu(a)

    # symmetrized integrand: f(u) + f(-u) vanishes pointwise for odd r + q,
    # so odd moments come out exactly zero instead of only up to quadrature
    # error
    def sym(u):
        f = u**r * _exp_gap(u) ** q
        g = (-u) ** r * _exp_gap(-u) ** q
        return f + g

    val, _ = quad(sym, 0.0, a, epsabs=1e-300, epsrel=1e-13, limit=200)
    return val / (2.0 * a)


def c_rq(r, q, half_width):
    """Mixed noise moment E[U^r (exp(-U) - exp(U))^q], U uniform on [-A, A].

    Closed form where available, adaptive quadrature (relative tolerance
    1e-12) otherwise.  Exactly zero whenever r + q is odd.
    """
    if half_width <= 0:
        raise ValueError(f"half-width must be positive, got {half_width}")
    r, q = int(r), int(q)
    if r < 0 or q < 0:
        raise ValueError("moment orders must be non-negative")
    return float(_c_rq_cached(r, q, float(half_width)))


def mu(half_width):
    """The contraction coefficient -E[U (exp(-U) - exp(U))].

    Equal to ``exp(A) + exp(-A) - (exp(A) - exp(-A)) / A``; evaluated by a
    power series below A = 0.05 where the closed form loses precision to
    cancellation.  Behaves like (2/3) A^2 for small A and is bounded between
    A^2/11 and A^2 for A <= 1.
    """
    a = float(half_width)
    if a <= 0:
        raise ValueError(f"half-width must be positive, got {a}")
    if a < 0.05:
        # 2 * sum_{n>=1} A^(2n) * 2n / (2n+1)!
        total = 0.0
        term_denom = 6.0  # (2n+1)! at n = 1
        a2 = a * a
        power = a2
        for n in range(1, 12):
            total += power * (2 * n) / term_denom
            power *= a2
            term_denom *= (2 * n + 2) * (2 * n + 3)
        return 2.0 * total
    return float(np.exp(a) + np.exp(-a) - (np.exp(a) - np.exp(-a)) / a)


@dataclass(frozen=True)
class MomentTable:
    """Cached noise moments for one box half-width."""

    half_width: float
    values: dict
    mu: float

    def c(self, r, q):
        return self.values[(r, q)]


@lru_cache(maxsize=256)
def _moment_table_cached(a):
    values = {(r, q): float(_c_rq_cached(r, q, a)) for (r, q) in TABLE_ORDERS}
    return MomentTable(half_width=a, values=values, mu=-values[(1, 1)])


def moment_table(half_width):
    """All moments needed by the interaction-matrix closed forms."""
    if half_width <= 0:
        raise ValueError(f"half-width must be positive, got {half_width}")
    return _moment_table_cached(float(half_width))


# ---------------------------------------------------------------------------
# interaction matrices: closed forms
# ---------------------------------------------------------------------------


def _v_coefficients(table):
    c20, c02 = table.c(2, 0), table.c(0, 2)
    c11, c22 = table.c(1, 1), table.c(2, 2)
    diag_coeff = c22 - c20 * c02 - 2.0 * c11**2
    outer_coeff = 2.0 * c11**2
    iso_coeff = 2.0 * c20 * c02
    return diag_coeff, outer_coeff, iso_coeff


def v_matrix(x, half_width):
    """Closed form of the noise-direction interaction matrix at a fixed point.

    This is the second moment E[(x^T (U' - U))^2 D D^T] over two independent
    uniform noise vectors, assembled from cached mixed moments.
    """
    x = np.asarray(x, dtype=float)
    table = moment_table(half_width)
    diag_coeff, outer_coeff, iso_coeff = _v_coefficients(table)
    return (
        diag_coeff * np.diag(x**2)
        + outer_coeff * np.outer(x, x)
        + iso_coeff * float(x @ x) * np.eye(x.size)
    )


def _w_coefficients(table):
    c20, c40 = table.c(2, 0), table.c(4, 0)
    c02, c22, c42 = table.c(0, 2), table.c(2, 2), table.c(4, 2)
    c11, c31 = table.c(1, 1), table.c(3, 1)
    return (
        c42 - 6 * c20 * c22 + 6 * c20**2 * c02 - c40 * c02 - 8 * c31 * c11 + 24 * c20 * c11**2,
        4 * c20 * c22 - 4 * c20**2 * c02 - 8 * c20 * c11**2,
        4 * c31 * c11 - 12 * c20 * c11**2,
        8 * c20 * c11**2,
        2 * c40 * c02 - 6 * c20**2 * c02,
        4 * c20**2 * c02,
    )


def w_integrand(x, half_width):
    """Closed form of the quadratic-noise second moment at a fixed point.

    Inner expectation over the two noise vectors only:
    E[((x^T U)^2 - (x^T U')^2)^2 D D^T].  Averaging this over covariate
    draws gives the full quadratic-noise matrix.
    """
    x = np.asarray(x, dtype=float)
    table = moment_table(half_width)
    k1, k2, k3, k4, k5, k6 = _w_coefficients(table)
    x2 = x**2
    x3 = x**3
    n2 = float(x2.sum())
    n4 = float((x2**2).sum())
    out = k3 * (np.outer(x3, x) + np.outer(x, x3)) + (k4 * n2) * np.outer(x, x)
    diag = k1 * x2**2 + (k2 * n2) * x2 + (k5 * n4 + k6 * n2**2)
    out[np.diag_indices_from(out)] += diag
    return out


# ---------------------------------------------------------------------------
# Monte Carlo machinery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCMatrix:
    """A matrix-valued Monte Carlo estimate with entrywise standard errors."""

    mean: np.ndarray
    stderr: np.ndarray
    n: int


def _mc_matrix_mean(integrand_chunk, n, d, rng, chunk=65_536):
    """Chunked mean/stderr of a matrix-valued integrand.

    ``integrand_chunk(m, rng)`` must return an (m, d, d) array of independent
    integrand evaluations.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    s1 = np.zeros((d, d))
    s2 = np.zeros((d, d))
    done = 0
    while done < n:
        m = min(chunk, n - done)
        vals = integrand_chunk(m, rng)
        s1 += vals.sum(axis=0)
        s2 += (vals**2).sum(axis=0)
        done += m
    mean = s1 / n
    if n == 1:
        return MCMatrix(mean=mean, stderr=np.zeros((d, d)), n=1)
    var = np.maximum(s2 / n - mean**2, 0.0) * (n / (n - 1))
    return MCMatrix(mean=mean, stderr=np.sqrt(var / n), n=n)


def _draw_noise_pair(m, d, half_width, rng):
    block = rng.uniform(-half_width, half_width, (m, 2 * d))
    return block[:, :d], block[:, d:]


def mc_v_matrix(x, half_width, n, rng):
    """Monte Carlo oracle for :func:`v_matrix`: plain sample average of
    (x^T (U' - U))^2 D D^T over n independent noise-pair draws."""
    x = np.asarray(x, dtype=float)
    d = x.size

    def integrand(m, rng):
        u, u_prime = _draw_noise_pair(m, d, half_width, rng)
        s = (u_prime - u) @ x
        dd = _exp_gap(u)
        return (s**2)[:, None, None] * (dd[:, :, None] * dd[:, None, :])

    return _mc_matrix_mean(integrand, n, d, rng)


def mc_w_integrand(x, half_width, n, rng):
    """Monte Carlo oracle for :func:`w_integrand`: sample average of
    ((x^T U)^2 - (x^T U')^2)^2 D D^T over n independent noise-pair draws."""
    x = np.asarray(x, dtype=float)
    d = x.size

    def integrand(m, rng):
        u, u_prime = _draw_noise_pair(m, d, half_width, rng)
        t = (u @ x) ** 2 - (u_prime @ x) ** 2
        dd = _exp_gap(u)
        return (t**2)[:, None, None] * (dd[:, :, None] * dd[:, None, :])

    return _mc_matrix_mean(integrand, n, d, rng)


def _weighted_v_chunk(xs, weights, table):
    """Per-draw w_i * V(x_i) as an (m, d, d) array, from the closed form."""
    diag_coeff, outer_coeff, iso_coeff = _v_coefficients(table)
    m, d = xs.shape
    w = np.ones(m) if weights is None else weights
    outer = xs[:, :, None] * xs[:, None, :]
    vals = (outer_coeff * w)[:, None, None] * outer
    idx = np.arange(d)
    x2 = xs**2
    vals[:, idx, idx] += w[:, None] * (diag_coeff * x2 + iso_coeff * x2.sum(axis=1)[:, None])
    return vals


def _w_integrand_chunk(xs, table):
    """Per-draw quadratic-noise closed form as an (m, d, d) array."""
    k1, k2, k3, k4, k5, k6 = _w_coefficients(table)
    m, d = xs.shape
    x2 = xs**2
    x3 = xs**3
    n2 = x2.sum(axis=1)
    n4 = (x2**2).sum(axis=1)
    cross = x3[:, :, None] * xs[:, None, :]
    vals = k3 * (cross + np.transpose(cross, (0, 2, 1)))
    vals += (k4 * n2)[:, None, None] * (xs[:, :, None] * xs[:, None, :])
    idx = np.arange(d)
    vals[:, idx, idx] += k1 * x2**2 + (k2 * n2)[:, None] * x2 + (k5 * n4 + k6 * n2**2)[:, None]
    return vals


def ev_matrix(half_width, design, d, n, rng):
    """Monte Carlo estimate of the design average of the noise-direction
    interaction matrix (exact in the noise, sampled in the covariates)."""
    table = moment_table(half_width)

    def integrand(m, rng):
        xs = design.sample(rng, m, d)
        return _weighted_v_chunk(xs, None, table)

    return _mc_matrix_mean(integrand, n, d, rng)


def ex2_v_matrix(half_width, design, d, n, rng):
    """Monte Carlo estimate of the design average weighted by the squared
    covariate norm."""
    table = moment_table(half_width)

    def integrand(m, rng):
        xs = design.sample(rng, m, d)
        return _weighted_v_chunk(xs, (xs**2).sum(axis=1), table)

    return _mc_matrix_mean(integrand, n, d, rng)


def w_matrix(half_width, design, d, n, rng):
    """Monte Carlo estimate of the quadratic-noise matrix: design average of
    :func:`w_integrand` over n covariate draws."""
    table = moment_table(half_width)

    def integrand(m, rng):
        xs = design.sample(rng, m, d)
        return _w_integrand_chunk(xs, table)

    return _mc_matrix_mean(integrand, n, d, rng)


# ---------------------------------------------------------------------------
# error-matrix recursion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkStepResult:
    """One step of the error second-moment recursion.

    ``s_next`` is the recursion output, ``stderr`` the entrywise Monte Carlo
    standard error contributed by this step's design averages.  The three
    sampled design averages are exposed for diagnostics.
    """

    s_next: np.ndarray
    stderr: np.ndarray
    ev: MCMatrix
    exsv: MCMatrix
    w: MCMatrix


def sk_step(s_prev, alpha, half_width, sigma, design, d, n_x, rng, chunk=65_536):
    """Advance the error second-moment matrix by one exact recursion step.

    The recursion is affine in the previous matrix:

        S_k = (I - 2 a mu Q) S (I - 2 a mu Q)
              + 4 a^2 (E[X^T S X V(X)] - mu^2 Q S Q)
              + 4 a^2 sigma^2 E[V(X)] + a^2 W

    with the three design expectations evaluated by averaging their
    noise-exact closed forms over ``n_x`` shared covariate draws.
    """
    s_prev = require_symmetric(np.asarray(s_prev, dtype=float), rtol=1e-10, what="s_prev")
    if s_prev.shape[0] != d:
        raise ValueError(f"s_prev has dimension {s_prev.shape[0]}, expected {d}")
    table = moment_table(half_width)
    q = design.q_matrix(d)

    # shared covariate draws for the three sampled terms
    s1 = {key: np.zeros((d, d)) for key in ("ev", "exsv", "w")}
    s2 = {key: np.zeros((d, d)) for key in ("ev", "exsv", "w")}
    done = 0
    while done < n_x:
        m = min(chunk, n_x - done)
        xs = design.sample(rng, m, d)
        quad_form = np.einsum("mi,ij,mj->m", xs, s_prev, xs)
        for key, vals in (
            ("ev", _weighted_v_chunk(xs, None, table)),
            ("exsv", _weighted_v_chunk(xs, quad_form, table)),
            ("w", _w_integrand_chunk(xs, table)),
        ):
            s1[key] += vals.sum(axis=0)
            s2[key] += (vals**2).sum(axis=0)
        done += m

    estimates = {}
    for key in s1:
        mean = s1[key] / n_x
        if n_x == 1:
            se = np.zeros((d, d))
        else:
            var = np.maximum(s2[key] / n_x - mean**2, 0.0) * (n_x / (n_x - 1))
            se = np.sqrt(var / n_x)
        estimates[key] = MCMatrix(mean=mean, stderr=se, n=n_x)

    contraction = np.eye(d) - (2.0 * alpha * table.mu) * q
    s_next = (
        contraction @ s_prev @ contraction
        + 4.0 * alpha**2 * (estimates["exsv"].mean - table.mu**2 * (q @ s_prev @ q))
        + (4.0 * alpha**2 * sigma**2) * estimates["ev"].mean
        + alpha**2 * estimates["w"].mean
    )
    s_next = 0.5 * (s_next + s_next.T)
    stderr = (
        4.0 * alpha**2 * estimates["exsv"].stderr
        + (4.0 * alpha**2 * sigma**2) * estimates["ev"].stderr
        + alpha**2 * estimates["w"].stderr
    )
    return SkStepResult(
        s_next=s_next,
        stderr=stderr,
        ev=estimates["ev"],
        exsv=estimates["exsv"],
        w=estimates["w"],
    )


# ---------------------------------------------------------------------------
# spectral bounds and divergence utilities
# ---------------------------------------------------------------------------


def spectral_bound_checks(half_width, d, design, n_x, rng):
    """Check the three noise-interaction spectral bounds on MC estimates.

    Each bound says the sampled matrix is dominated (in the symmetric-matrix
    order) by an explicit multiple of the identity; the check passes when
    the top eigenvalue of (estimate - bound * I) stays below five spectral
    standard errors.  Returns a list of (name, statistic, threshold, passed)
    tuples.
    """
    a = float(half_width)
    m2 = design.second_moment_bound(d)
    m4 = design.fourth_moment_bound(d)
    cases = (
        ("v_design_mean_bound", ev_matrix(a, design, d, n_x, rng), 12.0 * a**4 * d * m2),
        ("v_norm_weighted_bound", ex2_v_matrix(a, design, d, n_x, rng), 12.0 * a**4 * d**2 * m4),
        ("w_matrix_bound", w_matrix(a, design, d, n_x, rng), 107.0 * a**6 * d**2 * m4),
    )
    results = []
    for name, estimate, bound in cases:
        statistic = max_eigenvalue(estimate.mean - bound * np.eye(d))
        threshold = 5.0 * spectral_norm(estimate.stderr)
        results.append((name, float(statistic), float(threshold), bool(statistic <= threshold)))
    return results


# ---------------------------------------------------------------------------
# symmetrized Kullback-Leibler utilities
# ---------------------------------------------------------------------------


def _require_pd(m, what):
    m = require_symmetric(m, rtol=1e-10, what=what)
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise ValueError(f"{what} must be positive definite") from None
    return m


def sym_kl_gaussians(sigma0, sigma1):
    """Symmetrized KL divergence between two centered Gaussians.

    For covariance matrices S0, S1 this is
    tr(S1 S0^-1)/2 + tr(S0 S1^-1)/2 - dim.
    """
    sigma0 = _require_pd(sigma0, "sigma0")
    sigma1 = _require_pd(sigma1, "sigma1")
    if sigma0.shape != sigma1.shape:
        raise ValueError("covariance matrices must have equal shapes")
    dim = sigma0.shape[0]
    t01 = np.trace(np.linalg.solve(sigma0, sigma1))
    t10 = np.trace(np.linalg.solve(sigma1, sigma0))
    return float(0.5 * t01 + 0.5 * t10 - dim)


def sym_kl_bound(s0, s1, lambda0, lambda1):
    """Upper bound on the symmetrized KL via positive-definite minorants.

    Requires s0 >= lambda0 and s1 >= lambda1 in the symmetric-matrix order;
    then sym_kl(s0, s1) <= tr(lambda0^-1 (s1 - s0) lambda1^-1 (s1 - s0)) / 2.
    """
    s0 = require_symmetric(np.asarray(s0, dtype=float), rtol=1e-10, what="s0")
    s1 = require_symmetric(np.asarray(s1, dtype=float), rtol=1e-10, what="s1")
    lambda0 = _require_pd(lambda0, "lambda0")
    lambda1 = _require_pd(lambda1, "lambda1")
    delta = s1 - s0
    inner = np.linalg.solve(lambda1, delta)
    outer = np.linalg.solve(lambda0, delta @ inner)
    return float(0.5 * np.trace(outer))
