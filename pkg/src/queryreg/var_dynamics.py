"""Random-coefficient autoregressive view of the estimation error.

With access to the latent round (x, eps) the one-round error dynamics of
the zeroth-order learner factor exactly as

    w_k = G_k w_{k-1} + xi_k

with a random transition matrix G_k and a centered innovation xi_k, both
functions of that round's noise only.  This is a diagnostics/verification
decomposition: it needs latent access and therefore lives outside the
estimator module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .learner import exp_gap

__all__ = ["VarStep", "var_decompose"]


@dataclass(frozen=True)
class VarStep:
    """One-round error decomposition: error_next = transition @ error + innovation."""

    transition: np.ndarray
    innovation: np.ndarray
    error_next: np.ndarray


def var_decompose(theta_prev, theta_star, x, eps, u, u_prime, alpha):
    """Decompose one update round into its autoregressive form.

    ``transition`` is I - 2 alpha D (u' - u)^T x x^T and ``innovation`` is
    2 alpha eps x^T(u' - u) D + alpha ((x^T u)^2 - (x^T u')^2) D, where
    D = exp(-u) - exp(u) componentwise.  ``error_next`` reproduces the
    direct update applied to theta_prev, expressed as the next error
    vector theta_next - theta_star.
    """
    theta_prev = np.asarray(theta_prev, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    u_prime = np.asarray(u_prime, dtype=float)
    d = theta_prev.size

    gap = exp_gap(u)
    direction = float((u_prime - u) @ x)
    transition = np.eye(d) - (2.0 * alpha * direction) * np.outer(gap, x)
    innovation = (
        2.0 * alpha * eps * direction * gap
        + alpha * (float(x @ u) ** 2 - float(x @ u_prime) ** 2) * gap
    )
    error_next = transition @ (theta_prev - theta_star) + innovation
    return VarStep(transition=transition, innovation=innovation, error_next=error_next)
