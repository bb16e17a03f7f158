"""Experiment configuration: validated records plus a flat key=value file format.

A config file is plain text, one ``key = value`` pair per line, ``#`` starts
a comment.  Keys mirror the :class:`SimConfig` field names::

    d = 10
    sigma = 1.0
    R = 1.0
    k = 200000
    replicates = 200
    seed = 42
    theta_star = sphere:1.0
    design = gaussian-identity
    lambda_min = 1.0
    m4 = 3.0
    # optional overrides
    a_override = 0.25
    b_override = 0.02
    alpha_override = 0.001
    antithetic = false
    theta0 = zero

``theta_star`` / ``theta0`` accept ``zero``, ``sphere:<norm>`` (a fresh
uniformly random direction of the given norm per replicate), or an explicit
comma-separated vector.  ``design`` accepts ``gaussian-identity`` or
``diagonal:<v1,v2,...>`` (eigenvalues of the second-moment matrix).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = ["SimConfig", "DesignSpec", "load_config", "parse_config_text", "realize_theta"]


@dataclass(frozen=True)
class DesignSpec:
    """Distribution of the covariate vectors.

    ``kind`` is ``gaussian-identity`` (standard normal covariates) or
    ``diagonal`` (independent centered normals with the given variances,
    which are then also the eigenvalues of the second-moment matrix).
    """

    kind: str = "gaussian-identity"
    eigenvalues: tuple = ()

    def __post_init__(self):
        if self.kind not in ("gaussian-identity", "diagonal"):
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.kind == "diagonal":
            if not self.eigenvalues:
                raise ValueError("diagonal design requires eigenvalues")
            if any(v < 0 for v in self.eigenvalues):
                raise ValueError("diagonal design eigenvalues must be non-negative")

    def dimension_ok(self, d):
        return self.kind == "gaussian-identity" or len(self.eigenvalues) == d

    def q_matrix(self, d):
        """Second-moment matrix E[X X^T] of the covariates, in closed form."""
        if self.kind == "gaussian-identity":
            return np.eye(d)
        if len(self.eigenvalues) != d:
            raise ValueError(
                f"diagonal design has {len(self.eigenvalues)} eigenvalues, config d = {d}"
            )
        return np.diag(np.asarray(self.eigenvalues, dtype=float))

    def scale_vector(self, d):
        """Componentwise factor mapping standard normals to covariate draws."""
        if self.kind == "gaussian-identity":
            return np.ones(d)
        if len(self.eigenvalues) != d:
            raise ValueError(
                f"diagonal design has {len(self.eigenvalues)} eigenvalues, config d = {d}"
            )
        return np.sqrt(np.asarray(self.eigenvalues, dtype=float))

    def lambda_min(self, d):
        return 1.0 if self.kind == "gaussian-identity" else float(min(self.eigenvalues))

    def second_moment_bound(self, d):
        """max_i (1 v E[X_i^2]) for this design."""
        if self.kind == "gaussian-identity":
            return 1.0
        return max(1.0, float(max(self.eigenvalues)))

    def fourth_moment_bound(self, d):
        """max_i (1 v E[X_i^4]); fourth normal moment is 3 * variance^2."""
        if self.kind == "gaussian-identity":
            return 3.0
        return max(1.0, 3.0 * float(max(self.eigenvalues)) ** 2)

    def sample(self, rng, n, d):
        """Draw ``n`` covariate vectors as an (n, d) array from the stream."""
        return rng.standard_normal((n, d)) * self.scale_vector(d)

    def apply_scale(self, raw):
        """Map pre-drawn standard normals of shape (..., d) to covariate draws."""
        return raw * self.scale_vector(raw.shape[-1])

    def spec_string(self):
        if self.kind == "gaussian-identity":
            return "gaussian-identity"
        return "diagonal:" + ",".join(repr(float(v)) for v in self.eigenvalues)


def _parse_design(text):
    text = text.strip()
    if text == "gaussian-identity":
        return DesignSpec("gaussian-identity")
    if text.startswith("diagonal:"):
        vals = tuple(float(v) for v in text[len("diagonal:"):].split(","))
        return DesignSpec("diagonal", vals)
    raise ValueError(f"unknown design spec {text!r}")


@dataclass(frozen=True)
class SimConfig:
    """All knobs of one experiment, immutable once constructed."""

    d: int
    sigma: float
    R: float
    k: int
    replicates: int = 1
    seed: int = 0
    theta_star: str = "zero"
    design: DesignSpec = field(default_factory=DesignSpec)
    lambda_min: float | None = None
    m4: float | None = None
    a_override: float | None = None
    b_override: float | None = None
    alpha_override: float | None = None
    antithetic: bool = False
    theta0: str = "zero"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.R <= 0:
            raise ValueError(f"R must be > 0, got {self.R}")
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if not self.design.dimension_ok(self.d):
            raise ValueError("design eigenvalue count does not match d")
        _validate_theta_spec(self.theta_star, self.d, self.R, "theta_star")
        _validate_theta_spec(self.theta0, self.d, None, "theta0")
        if self.a_override is not None and self.a_override <= 0:
            raise ValueError("a_override must be positive")
        if self.b_override is not None and not (0 < self.b_override <= 1):
            raise ValueError("b_override must lie in (0, 1]")
        if self.alpha_override is not None and self.alpha_override <= 0:
            raise ValueError("alpha_override must be positive")

    @property
    def lambda_min_effective(self):
        if self.lambda_min is not None:
            return self.lambda_min
        return self.design.lambda_min(self.d)

    @property
    def m4_effective(self):
        if self.m4 is not None:
            return self.m4
        return self.design.fourth_moment_bound(self.d)

    def with_updates(self, **kw):
        return replace(self, **kw)


def _validate_theta_spec(spec, d, radius, what):
    if isinstance(spec, str):
        spec = spec.strip()
        if spec == "zero":
            return
        if spec.startswith("sphere:"):
            norm = float(spec[len("sphere:"):])
            if norm < 0:
                raise ValueError(f"{what} sphere norm must be >= 0")
            if radius is not None and norm > radius * (1 + 1e-12):
                raise ValueError(f"{what} norm {norm} exceeds the parameter radius {radius}")
            return
        vec = _parse_vector(spec)
    else:
        vec = np.asarray(spec, dtype=float)
    if vec.shape != (d,):
        raise ValueError(f"{what} vector has length {vec.size}, config d = {d}")
    if radius is not None and np.linalg.norm(vec) > radius * (1 + 1e-12):
        raise ValueError(f"{what} norm {np.linalg.norm(vec)} exceeds the parameter radius {radius}")


def _parse_vector(text):
    return np.array([float(v) for v in text.split(",")], dtype=float)


def realize_theta(spec, d, rng):
    """Materialize a parameter-vector spec, drawing from ``rng`` when random.

    ``sphere:<norm>`` consumes exactly ``d`` standard normals from the
    stream; the other forms consume nothing.
    """
    if isinstance(spec, str):
        spec = spec.strip()
        if spec == "zero":
            return np.zeros(d)
        if spec.startswith("sphere:"):
            norm = float(spec[len("sphere:"):])
            direction = rng.standard_normal(d)
            length = np.linalg.norm(direction)
            if length == 0.0:
                direction = np.zeros(d)
                direction[0] = 1.0
                length = 1.0
            return (norm / length) * direction
        return _parse_vector(spec)
    return np.asarray(spec, dtype=float).copy()


_BOOL_KEYS = {"antithetic"}
_INT_KEYS = {"d", "k", "replicates", "seed"}
_FLOAT_KEYS = {"sigma", "R", "lambda_min", "m4", "a_override", "b_override", "alpha_override"}
_STR_KEYS = {"theta_star", "theta0"}


def parse_config_text(text):
    """Parse flat ``key = value`` text into a :class:`SimConfig`."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    kwargs = {}
    for key, value in raw.items():
        if key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        elif key in _BOOL_KEYS:
            lowered = value.lower()
            if lowered not in ("true", "false"):
                raise ValueError(f"{key} must be true or false, got {value!r}")
            kwargs[key] = lowered == "true"
        elif key in _STR_KEYS:
            kwargs[key] = value
        elif key == "design":
            kwargs[key] = _parse_design(value)
        else:
            raise ValueError(f"unknown config key {key!r}")

    missing = {"d", "sigma", "R", "k"} - kwargs.keys()
    if missing:
        raise ValueError(f"config is missing required keys: {sorted(missing)}")
    return SimConfig(**kwargs)


def load_config(path):
    """Read a config file from disk."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"))
