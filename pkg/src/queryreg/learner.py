"""The zeroth-order learner driven entirely by scalar query responses.

Each round the learner proposes two query vectors, the current iterate plus
two independent uniform perturbations, and folds the difference of the two
squared residual responses back into the iterate:

    theta <- theta + alpha * (z^2 - z'^2) * (exp(-U) - exp(U))

componentwise in the perturbation U.  The module also owns the decreasing
learning-rate schedule and its stability constant.

This module must stay free of any reference to the latent data: it imports
nothing from the oracle side and sees only (z, z') scalars.  A source-level
test enforces that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ScheduleParams",
    "LearnerState",
    "stability_constant",
    "default_box_halfwidth",
    "learning_rate",
    "guarantee_threshold",
    "init_learner",
    "propose_queries",
    "apply_update",
    "update_step",
    "exp_gap",
]


def exp_gap(u):
    """Componentwise update weight exp(-u) - exp(u) (= -2 sinh u)."""
    return -2.0 * np.sinh(u)


def stability_constant(lambda_min, m4):
    """Schedule constant B = min(1, lambda_min^2 / (2904 m4))."""
    if lambda_min <= 0:
        raise ValueError(f"lambda_min must be positive, got {lambda_min}")
    if m4 < 1:
        raise ValueError(f"m4 must be >= 1, got {m4}")
    return min(1.0, lambda_min**2 / (2904.0 * m4))


@dataclass(frozen=True)
class ScheduleParams:
    """Inputs of the learning-rate schedule.

    ``lambda_min`` and ``m4`` cannot be estimated from query responses, so
    they are configuration inputs (for standard-normal covariates the exact
    values are 1 and 3).  ``b_override`` replaces the conservative stability
    constant while keeping the schedule shape; ``alpha_override`` pins the
    rate to a constant.  Either override forfeits the schedule's guarantees
    and such runs are tagged accordingly by the harness.
    """

    d: int
    sigma: float
    lambda_min: float = 1.0
    m4: float = 3.0
    b_override: float | None = None
    alpha_override: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.lambda_min <= 0:
            raise ValueError(f"lambda_min must be positive, got {self.lambda_min}")
        if self.m4 < 1:
            raise ValueError(f"m4 must be >= 1, got {self.m4}")
        if self.b_override is not None and not (0 < self.b_override <= 1):
            raise ValueError("b_override must lie in (0, 1]")
        if self.alpha_override is not None and self.alpha_override <= 0:
            raise ValueError("alpha_override must be positive")

    @property
    def b(self):
        if self.b_override is not None:
            return self.b_override
        return stability_constant(self.lambda_min, self.m4)

    @property
    def overridden(self):
        return self.b_override is not None or self.alpha_override is not None


def default_box_halfwidth(sigma, d):
    """Default perturbation half-width sigma / sqrt(d)."""
    if sigma <= 0:
        raise ValueError("the default half-width needs sigma > 0; set A explicitly instead")
    return sigma / math.sqrt(d)


def learning_rate(k, schedule, half_width):
    """Learning rate for round k:

        alpha_k = 11 B log(d) / (A^2 lambda_min (B k + d^2 log d)).

    The product k * alpha_k * A^2 * lambda_min tends to 11 log(d), so the
    effective rate alpha_k A^2 decays like 1/k once B k dominates.  With
    ``alpha_override`` set, returns the override unchanged.  ``k`` may be an
    array of round indices.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("round indices must be >= 1")
    if schedule.alpha_override is not None:
        value = np.full_like(k, schedule.alpha_override)
        return float(value) if value.ndim == 0 else value
    if schedule.d < 2:
        raise ValueError("the schedule needs d >= 2 (log d must be positive)")
    log_d = math.log(schedule.d)
    b = schedule.b
    value = 11.0 * b * log_d / (half_width**2 * schedule.lambda_min * (b * k + schedule.d**2 * log_d))
    return float(value) if value.ndim == 0 else value


def guarantee_threshold(schedule):
    """Round count 2 d^2 log(d) / B past which the schedule's convergence
    guarantee applies (for d >= 9 and no overrides)."""
    if schedule.d < 2:
        raise ValueError("threshold needs d >= 2")
    return 2.0 * schedule.d**2 * math.log(schedule.d) / schedule.b


class LearnerState:
    """Iterate, round counter and the in-flight perturbation pair.

    ``propose_queries`` and ``apply_update`` must strictly alternate; the
    pending perturbations are cached between the two calls.
    """

    def __init__(self, theta, half_width, schedule, antithetic=False):
        theta = np.asarray(theta, dtype=float).copy()
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        if half_width <= 0:
            raise ValueError(f"box half-width must be positive, got {half_width}")
        self.theta = theta
        self.k = 0
        self.half_width = float(half_width)
        self.schedule = schedule
        self.antithetic = antithetic
        self._pending = None

    @property
    def d(self):
        return self.theta.size


def init_learner(d, half_width, schedule, theta0=None, antithetic=False):
    """Create a learner; A defaults to sigma / sqrt(d), theta0 to zero."""
    if half_width is None:
        half_width = default_box_halfwidth(schedule.sigma, d)
    if theta0 is None:
        theta0 = np.zeros(d)
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (d,):
        raise ValueError(f"theta0 must have shape ({d},)")
    return LearnerState(theta0, half_width, schedule, antithetic=antithetic)


def propose_queries(state, rng):
    """Draw the round's perturbation pair and return the two query vectors.

    Returns (v, v', u, u') with v = theta + u and v' = theta + u'; the pair
    (u, u') is cached until :func:`apply_update` consumes it.  With
    ``antithetic`` set, u' = -u instead of an independent draw.
    """
    if state._pending is not None:
        raise RuntimeError("propose_queries called twice without apply_update")
    u = rng.uniform(-state.half_width, state.half_width, state.d)
    if state.antithetic:
        u_prime = -u
    else:
        u_prime = rng.uniform(-state.half_width, state.half_width, state.d)
    state._pending = (u, u_prime)
    return state.theta + u, state.theta + u_prime, u, u_prime


def update_step(theta, u, u_prime, z, z_prime, alpha):
    """Pure update kernel; broadcasts over any leading batch axes."""
    coeff = np.asarray(z, dtype=float) ** 2 - np.asarray(z_prime, dtype=float) ** 2
    return theta + alpha * coeff[..., None] * exp_gap(u)


def apply_update(state, z, z_prime, alpha):
    """Consume the pending perturbations and advance the iterate one round."""
    if state._pending is None:
        raise RuntimeError("apply_update called without a pending proposal")
    if not (np.isfinite(z) and np.isfinite(z_prime)):
        raise ValueError(f"query responses must be finite, got ({z}, {z_prime})")
    u, u_prime = state._pending
    state.theta = update_step(state.theta, u, u_prime, float(z), float(z_prime), alpha)
    state.k += 1
    state._pending = None
    return state
