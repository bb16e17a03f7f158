"""Pre-committed block query design and its unbiased component estimator.

The non-adaptive strategy fixes all query vectors before any data are
seen.  When the round budget is too small the best move is to not query at
all and return the zero vector; otherwise the rounds are partitioned into
one block per coordinate, every round in block s issues the scaled basis
vector (R v sigma) e_s, and each component is recovered from the block
mean of the squared responses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonadaptivePlan",
    "NonadaptiveEstimate",
    "plan",
    "run_queries",
    "estimate",
    "risk_bound",
    "zero_estimator_threshold",
]


def zero_estimator_threshold(d, R, sigma):
    """Round budget at or below which the zero estimator is minimax-safe:
    2 d^2 ((sigma^2 / R^2) v 1)."""
    return 2.0 * d**2 * max(sigma**2 / R**2, 1.0)


@dataclass(frozen=True)
class NonadaptivePlan:
    """Either the zero estimator or a partition of rounds into d blocks.

    Blocks are contiguous round ranges stored as (start, stop) pairs; every
    block has at least k / (2d) rounds.  All query vectors share the norm
    ``query_scale`` = R v sigma.
    """

    mode: str  # "zero-estimator" | "blocks"
    k: int
    d: int
    query_scale: float
    blocks: tuple = ()

    def block_sizes(self):
        return tuple(stop - start for start, stop in self.blocks)


def plan(k, d, R, sigma):
    """Build the pre-committed plan for a k-round budget in dimension d."""
    if k < 0 or d < 1:
        raise ValueError(f"need k >= 0 and d >= 1, got k={k}, d={d}")
    if R <= 0 or sigma < 0:
        raise ValueError(f"need R > 0 and sigma >= 0, got R={R}, sigma={sigma}")
    scale = max(R, sigma)
    if k <= zero_estimator_threshold(d, R, sigma):
        return NonadaptivePlan(mode="zero-estimator", k=k, d=d, query_scale=scale)
    base, extra = divmod(k, d)
    blocks = []
    start = 0
    for s in range(d):
        size = base + (1 if s < extra else 0)
        blocks.append((start, start + size))
        start += size
    return NonadaptivePlan(mode="blocks", k=k, d=d, query_scale=scale, blocks=tuple(blocks))


def run_queries(plan_, session):
    """Issue the plan's queries against a session; returns per-block response
    arrays.

    Uses one informative query per round (the second query vector is zero
    and its response is discarded).  The zero-estimator plan issues no
    queries at all.
    """
    if plan_.mode == "zero-estimator":
        return []
    d = plan_.d
    samples = []
    for s, (start, stop) in enumerate(plan_.blocks):
        v = np.zeros(d)
        v[s] = plan_.query_scale
        samples.append(session.query_single_block(v, stop - start))
    return samples


def estimate(plan_, samples, R, sigma, theta_norm_sq):
    """Recover the parameter vector from per-block squared-response means.

    Component s is (sigma^2 + |theta|^2 + scale^2 - mean(z^2 over block s))
    / (2 scale).  ``theta_norm_sq`` is the squared parameter norm consumed
    by the construction; in oracle mode it is the true value, in plug-in
    mode a pilot estimate.
    """
    if plan_.mode == "zero-estimator":
        return NonadaptiveEstimate(theta_hat=np.zeros(plan_.d), block_means=())
    if len(samples) != plan_.d:
        raise ValueError(f"expected {plan_.d} blocks of samples, got {len(samples)}")
    scale = plan_.query_scale
    means = []
    for (start, stop), z in zip(plan_.blocks, samples):
        if stop - start < 1 or len(z) != stop - start:
            raise ValueError("every block needs its full complement of samples")
        means.append(float(np.mean(np.asarray(z) ** 2)))
    means = np.array(means)
    theta_hat = (sigma**2 + theta_norm_sq + scale**2 - means) / (2.0 * scale)
    return NonadaptiveEstimate(theta_hat=theta_hat, block_means=tuple(means))


@dataclass(frozen=True)
class NonadaptiveEstimate:
    theta_hat: np.ndarray
    block_means: tuple


def risk_bound(k, d, R, sigma):
    """Worst-case risk guarantee 25 min(R^2, (d^2 / k) (R v sigma)^2)."""
    if k < 1:
        return 25.0 * R**2
    return 25.0 * min(R**2, (d**2 / k) * max(R, sigma) ** 2)
