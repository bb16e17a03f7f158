import numpy as np
import pytest

from queryreg.config import DesignSpec, SimConfig, parse_config_text, realize_theta
from queryreg.rng import rng_stream

BASE = """
d = 5
sigma = 1.0
R = 2.0
k = 1000
replicates = 3
seed = 11
theta_star = sphere:1.5
design = gaussian-identity
"""


def test_parse_required_and_defaults():
    cfg = parse_config_text(BASE)
    assert cfg.d == 5 and cfg.k == 1000 and cfg.replicates == 3 and cfg.seed == 11
    assert cfg.design.kind == "gaussian-identity"
    assert cfg.lambda_min_effective == 1.0
    assert cfg.m4_effective == 3.0
    assert cfg.a_override is None and cfg.b_override is None
    assert cfg.antithetic is False and cfg.theta0 == "zero"


def test_parse_full_key_set():
    cfg = parse_config_text(
        BASE
        + """
lambda_min = 0.5
m4 = 4.0
a_override = 0.3
b_override = 0.02
alpha_override = 0.001
antithetic = true
theta0 = 0.1,0.0,0.0,0.0,0.0
"""
    )
    assert cfg.lambda_min == 0.5 and cfg.m4 == 4.0
    assert cfg.a_override == 0.3 and cfg.b_override == 0.02
    assert cfg.alpha_override == 0.001 and cfg.antithetic is True
    assert realize_theta(cfg.theta0, 5, rng_stream(0, 0))[0] == 0.1


def test_comments_and_blank_lines_ignored():
    cfg = parse_config_text("# header\n\nd = 2\nsigma = 0.0  # noiseless\nR = 1.0\nk = 10\n")
    assert cfg.d == 2 and cfg.sigma == 0.0


@pytest.mark.parametrize(
    "line",
    ["bogus = 1", "d = 2"],  # unknown key; duplicate key
)
def test_parse_rejects_bad_lines(line):
    with pytest.raises(ValueError):
        parse_config_text(BASE + line + "\n")


def test_missing_required_key_rejected():
    with pytest.raises(ValueError, match="missing"):
        parse_config_text("d = 3\nsigma = 1.0\nR = 1.0\n")


def test_theta_star_norm_must_fit_radius():
    with pytest.raises(ValueError):
        parse_config_text(BASE.replace("sphere:1.5", "sphere:2.5"))
    with pytest.raises(ValueError):
        parse_config_text(BASE.replace("sphere:1.5", "3.0,0,0,0,0"))


def test_explicit_theta_star_dimension_checked():
    with pytest.raises(ValueError):
        parse_config_text(BASE.replace("sphere:1.5", "1.0,0.0"))


def test_diagonal_design():
    cfg = parse_config_text(
        BASE.replace("design = gaussian-identity", "design = diagonal:1.0,2.0,3.0,4.0,0.5")
    )
    q = cfg.design.q_matrix(5)
    assert np.array_equal(q, np.diag([1.0, 2.0, 3.0, 4.0, 0.5]))
    assert cfg.lambda_min_effective == 0.5
    assert cfg.m4_effective == 3.0 * 16.0  # 3 * (max eigenvalue)^2
    draws = cfg.design.sample(rng_stream(0, 0), 100_000, 5)
    per_comp = draws.var(axis=0)
    assert np.all(np.abs(per_comp - [1.0, 2.0, 3.0, 4.0, 0.5]) < 0.1)


def test_diagonal_design_dimension_mismatch():
    with pytest.raises(ValueError):
        parse_config_text(BASE.replace("design = gaussian-identity", "design = diagonal:1.0,2.0"))


def test_invalid_numeric_ranges():
    with pytest.raises(ValueError):
        SimConfig(d=0, sigma=1.0, R=1.0, k=10)
    with pytest.raises(ValueError):
        SimConfig(d=2, sigma=-1.0, R=1.0, k=10)
    with pytest.raises(ValueError):
        SimConfig(d=2, sigma=1.0, R=0.0, k=10)
    with pytest.raises(ValueError):
        SimConfig(d=2, sigma=1.0, R=1.0, k=10, replicates=0)
    with pytest.raises(ValueError):
        SimConfig(d=2, sigma=1.0, R=1.0, k=10, b_override=1.5)


def test_realize_theta_forms():
    rng = rng_stream(3, 0)
    assert np.array_equal(realize_theta("zero", 4, rng), np.zeros(4))
    v = realize_theta("sphere:2.0", 4, rng)
    assert abs(np.linalg.norm(v) - 2.0) < 1e-12
    w = realize_theta("1.0,2.0,3.0,4.0", 4, rng)
    assert np.array_equal(w, [1.0, 2.0, 3.0, 4.0])


def test_sphere_draws_are_stream_deterministic():
    a = realize_theta("sphere:1.0", 6, rng_stream(8, 2))
    b = realize_theta("sphere:1.0", 6, rng_stream(8, 2))
    assert np.array_equal(a, b)
