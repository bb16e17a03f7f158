import math

import numpy as np
import pytest
from scipy.integrate import quad

from queryreg.config import DesignSpec
from queryreg import moments as mo
from queryreg.rng import rng_stream


def quad_moment(r, q, a):
    """Independent quadrature oracle for the mixed noise moments."""
    val, _ = quad(
        lambda u: u**r * (math.exp(-u) - math.exp(u)) ** q, -a, a, epsabs=1e-14, limit=400
    )
    return val / (2 * a)


# ---------------------------------------------------------------------------
# scalar moments
# ---------------------------------------------------------------------------


def test_c00_is_one():
    assert mo.c_rq(0, 0, 0.3) == 1.0
    assert mo.c_rq(0, 0, 1.0) == 1.0


def test_c20_closed_form():
    assert abs(mo.c_rq(2, 0, 1.0) - 1.0 / 3.0) < 1e-15
    assert abs(mo.c_rq(2, 0, 0.5) - 0.25 / 3.0) < 1e-15


def test_mu_at_one_is_two_over_e():
    assert abs(mo.mu(1.0) - 2.0 / math.e) < 1e-14
    assert abs(-mo.c_rq(1, 1, 1.0) - 2.0 / math.e) < 1e-14


def test_c02_closed_value():
    # (exp(2A) - exp(-2A)) / (2A) - 2 at A = 1
    assert abs(mo.c_rq(0, 2, 1.0) - (math.sinh(2.0) - 2.0)) < 1e-12


@pytest.mark.parametrize("r,q", [(3, 1), (0, 2), (2, 2), (4, 2), (4, 0)])
@pytest.mark.parametrize("a", [0.25, 0.7, 1.0])
def test_c_rq_against_independent_quadrature(r, q, a):
    assert abs(mo.c_rq(r, q, a) - quad_moment(r, q, a)) < 1e-11 * max(1.0, abs(quad_moment(r, q, a)))


def test_odd_moments_vanish_exactly():
    grid = [(i + 1) / 50 for i in range(50)]
    for a in grid:
        for r, q in ((1, 0), (3, 0), (0, 1), (2, 1), (1, 2), (3, 2)):
            assert abs(mo.c_rq(r, q, a)) < 1e-14


def test_mu_bounds_on_grid():
    for i in range(50):
        a = (i + 1) / 50
        m = mo.mu(a)
        assert a**2 / 11 <= m <= a**2
        assert mo.c_rq(0, 2, a) <= 3 * m


def test_cr2_bound_on_grid():
    for i in range(50):
        a = (i + 1) / 50
        for r in (0, 2, 4):
            assert mo.c_rq(r, 2, a) <= 3 * a ** (r + 2)


def test_mu_small_half_width_limit():
    # Taylor expansion of the closed form: mu(A)/A^2 -> 2/3
    assert abs(mo.mu(1e-4) / 1e-8 - 2.0 / 3.0) < 1e-6
    # both evaluation branches agree with the quadrature oracle near the switch
    for a in (0.049, 0.051):
        oracle = -quad_moment(1, 1, a)
        assert abs(mo.mu(a) - oracle) < 1e-10 * oracle


def test_mu_rejects_nonpositive():
    with pytest.raises(ValueError):
        mo.mu(0.0)
    with pytest.raises(ValueError):
        mo.c_rq(2, 0, -1.0)


def test_moment_table_contents():
    table = mo.moment_table(0.5)
    assert table.mu == -table.c(1, 1)
    for r, q in mo.TABLE_ORDERS:
        assert table.c(r, q) == mo.c_rq(r, q, 0.5)


# ---------------------------------------------------------------------------
# interaction matrices
# ---------------------------------------------------------------------------


def test_v_matrix_zero_input():
    assert np.array_equal(mo.v_matrix(np.zeros(4), 0.5), np.zeros((4, 4)))


def test_v_matrix_symmetric_psd():
    rng = rng_stream(3, 0)
    for _ in range(10):
        v = mo.v_matrix(rng.standard_normal(5), 0.4)
        assert np.array_equal(v, v.T)
        assert np.linalg.eigvalsh(v)[0] >= -1e-12


def test_v_matrix_matches_mc_oracle():
    rng = rng_stream(4, 0)
    x = rng.standard_normal(4)
    v = mo.v_matrix(x, 0.5)
    mc = mo.mc_v_matrix(x, 0.5, 200_000, rng)
    assert np.all(np.abs(v - mc.mean) <= 5 * mc.stderr)


def test_mc_v_matrix_zero_input_and_single_draw():
    rng = rng_stream(5, 0)
    assert np.array_equal(mo.mc_v_matrix(np.zeros(3), 0.5, 10, rng).mean, np.zeros((3, 3)))
    # n = 1 equals the single-draw integrand computed from the same stream
    x = np.array([1.0, -2.0, 0.5])
    probe = rng_stream(6, 1)
    single = mo.mc_v_matrix(x, 0.3, 1, probe)
    replay = rng_stream(6, 1)
    block = replay.uniform(-0.3, 0.3, (1, 6))
    u, u_prime = block[0, :3], block[0, 3:]
    s = float((u_prime - u) @ x)
    d_vec = -2.0 * np.sinh(u)
    assert np.allclose(single.mean, s**2 * np.outer(d_vec, d_vec), rtol=0, atol=0)
    assert np.array_equal(single.stderr, np.zeros((3, 3)))


def test_w_integrand_zero_input_and_symmetry():
    assert np.array_equal(mo.w_integrand(np.zeros(3), 0.5), np.zeros((3, 3)))
    rng = rng_stream(7, 0)
    w = mo.w_integrand(rng.standard_normal(4), 0.6)
    assert np.array_equal(w, w.T)


def test_w_integrand_matches_mc_oracle():
    rng = rng_stream(8, 0)
    x = rng.standard_normal(3)
    w = mo.w_integrand(x, 0.5)
    mc = mo.mc_w_integrand(x, 0.5, 200_000, rng)
    assert np.all(np.abs(w - mc.mean) <= 5 * mc.stderr)


def test_w_matrix_degenerate_design_is_zero():
    design = DesignSpec("diagonal", (0.0, 0.0, 0.0))
    rng = rng_stream(9, 0)
    w = mo.w_matrix(0.5, design, 3, 1000, rng)
    assert np.array_equal(w.mean, np.zeros((3, 3)))


def test_w_matrix_symmetric_psd_within_mc_tolerance():
    rng = rng_stream(10, 0)
    w = mo.w_matrix(0.5, DesignSpec(), 3, 100_000, rng)
    assert np.max(np.abs(w.mean - w.mean.T)) < 1e-12
    floor = np.linalg.eigvalsh(w.mean)[0]
    assert floor >= -5 * np.max(w.stderr)


# ---------------------------------------------------------------------------
# error recursion
# ---------------------------------------------------------------------------


def test_sk_step_zero_rate_is_identity():
    rng = rng_stream(11, 0)
    s_prev = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.1], [0.0, -0.1, 0.5]])
    res = mo.sk_step(s_prev, 0.0, 0.4, 1.0, DesignSpec(), 3, 500, rng)
    assert np.array_equal(res.s_next, s_prev)


def test_sk_step_pure_noise_floor():
    rng = rng_stream(12, 0)
    alpha = 0.02
    res = mo.sk_step(np.zeros((3, 3)), alpha, 0.4, 0.0, DesignSpec(), 3, 2000, rng)
    assert np.allclose(res.s_next, alpha**2 * res.w.mean, rtol=0, atol=1e-18)


def test_sk_step_rejects_asymmetric_input():
    rng = rng_stream(13, 0)
    bad = np.array([[1.0, 0.2], [0.4, 1.0]])
    with pytest.raises(ValueError):
        mo.sk_step(bad, 0.01, 0.3, 1.0, DesignSpec(), 2, 100, rng)


def test_sk_step_tracks_bruteforce_one_step():
    # single-step check at moderate size; the acceptance suite runs 5 steps
    rng = rng_stream(14, 0)
    d = 3
    theta_star = np.array([0.6, -0.3, 0.1])
    alpha, a, sigma = 1e-3, 0.3, 1.0
    s0 = np.outer(theta_star, theta_star)
    res = mo.sk_step(s0, alpha, a, sigma, DesignSpec(), d, 200_000, rng)

    n = 50_000
    g = rng_stream(15, 0)
    err = np.tile(-theta_star, (n, 1))
    x = g.standard_normal((n, d))
    eps = sigma * g.standard_normal(n)
    u = g.uniform(-a, a, (n, d))
    u_prime = g.uniform(-a, a, (n, d))
    resid = eps - (x * err).sum(axis=1)
    z = resid - (x * u).sum(axis=1)
    z_prime = resid - (x * u_prime).sum(axis=1)
    err = err + (alpha * (z**2 - z_prime**2))[:, None] * (-2.0 * np.sinh(u))
    outer = err[:, :, None] * err[:, None, :]
    emp = outer.mean(axis=0)
    emp_se = outer.std(axis=0, ddof=1) / math.sqrt(n)
    combined = np.sqrt(emp_se**2 + res.stderr**2)
    assert np.all(np.abs(emp - res.s_next) <= 5 * combined)


# ---------------------------------------------------------------------------
# spectral bounds
# ---------------------------------------------------------------------------


def test_spectral_bounds_hold():
    rng = rng_stream(16, 0)
    for name, stat, thr, ok in mo.spectral_bound_checks(0.5, 4, DesignSpec(), 50_000, rng):
        assert ok, f"{name}: {stat} > {thr}"


def test_spectral_bounds_trivial_dimension():
    rng = rng_stream(17, 0)
    results = mo.spectral_bound_checks(0.3, 1, DesignSpec(), 20_000, rng)
    assert all(ok for (_, _, _, ok) in results)


def test_interaction_scaling_in_half_width():
    # the two noise-direction statistics scale ~A^4, the quadratic one ~A^6
    d = 3
    gamma = 0.5
    design = DesignSpec()
    ev1 = mo.ev_matrix(0.5, design, d, 50_000, rng_stream(18, 0))
    ev2 = mo.ev_matrix(0.25, design, d, 50_000, rng_stream(18, 0))
    ratio_v = np.linalg.norm(ev2.mean) / np.linalg.norm(ev1.mean)
    assert 0.8 * gamma**4 <= ratio_v <= 1.2 * gamma**4

    w1 = mo.w_matrix(0.5, design, d, 50_000, rng_stream(18, 0))
    w2 = mo.w_matrix(0.25, design, d, 50_000, rng_stream(18, 0))
    ratio_w = np.linalg.norm(w2.mean) / np.linalg.norm(w1.mean)
    assert 0.8 * gamma**6 <= ratio_w <= 1.2 * gamma**6


# ---------------------------------------------------------------------------
# symmetrized KL
# ---------------------------------------------------------------------------


def test_sym_kl_equal_matrices():
    rng = rng_stream(19, 0)
    base = rng.standard_normal((3, 3))
    s = base @ base.T + np.eye(3)
    assert abs(mo.sym_kl_gaussians(s, s)) < 1e-10
    assert mo.sym_kl_bound(s, s, 0.5 * s, 0.5 * s) >= 0.0


def test_sym_kl_trace_formula_example():
    alpha, beta = 0.7, -0.4
    s0 = np.eye(2)
    s1 = s0 + np.array([[alpha, beta], [beta, 0.0]])
    bound = mo.sym_kl_bound(s0, s1, np.eye(2), 0.5 * np.eye(2))
    assert abs(bound - (alpha**2 + 2 * beta**2)) < 1e-12


def test_sym_kl_bound_dominates_on_admissible_cases():
    rng = rng_stream(20, 0)
    produced = 0
    while produced < 100:
        base = rng.standard_normal((2, 2))
        s0 = base @ base.T + 0.1 * np.eye(2)
        pert = rng.standard_normal((2, 2))
        s1 = s0 + 0.5 * (pert @ pert.T)
        lam0 = 0.5 * np.diag(np.diag(s0))
        lam1 = 0.5 * np.diag(np.diag(s1))
        if np.linalg.eigvalsh(s0 - lam0)[0] < 0 or np.linalg.eigvalsh(s1 - lam1)[0] < 0:
            continue
        produced += 1
        assert mo.sym_kl_gaussians(s0, s1) <= mo.sym_kl_bound(s0, s1, lam0, lam1) + 1e-12


def test_sym_kl_rejects_non_pd():
    with pytest.raises(ValueError):
        mo.sym_kl_gaussians(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(ValueError):
        mo.sym_kl_bound(np.eye(2), np.eye(2), np.diag([0.0, 1.0]), np.eye(2))
