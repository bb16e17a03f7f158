"""Latent regression instance and the query interface that guards it.

The estimator never sees the covariate/response pairs.  It hands a
:class:`QuerySession` two query vectors per round and receives two scalars
back; the session draws one fresh latent sample per round and consumes it
for exactly that round.  Sessions built with ``expose_latents=True`` (test
mode) additionally record the latent draws so verification suites can check
algebraic identities; production sessions structurally cannot reveal them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .config import DesignSpec, realize_theta

__all__ = [
    "RegressionInstance",
    "QuerySession",
    "QueryRound",
    "new_instance",
    "conditional_covariance",
    "one_query_adapter",
    "one_query_map_back",
    "reveal_truth",
    "write_audit_csv",
]


@dataclass(frozen=True)
class RegressionInstance:
    """Hidden truth of one experiment replicate."""

    theta_star: np.ndarray
    sigma: float
    design: DesignSpec
    q: np.ndarray

    @property
    def d(self):
        return self.theta_star.size


def new_instance(config, rng):
    """Materialize an instance from a config, drawing the parameter vector
    from ``rng`` when the spec is random.

    The realized parameter always satisfies the configured norm radius.
    """
    theta_star = realize_theta(config.theta_star, config.d, rng)
    norm = float(np.linalg.norm(theta_star))
    if norm > config.R * (1 + 1e-12):
        raise ValueError(f"realized parameter norm {norm} exceeds radius {config.R}")
    return RegressionInstance(
        theta_star=theta_star,
        sigma=config.sigma,
        design=config.design,
        q=config.design.q_matrix(config.d),
    )


@dataclass(frozen=True)
class QueryRound:
    """One audited round: query vectors and the two scalar responses."""

    index: int
    v: np.ndarray
    v_prime: np.ndarray
    z: float
    z_prime: float


@dataclass
class _LatentRound:
    x: np.ndarray
    eps: float


class QuerySession:
    """Stateful consumer of latent samples; answers query-vector pairs.

    ``protocol`` selects what the second scalar is:

    * ``standard``:     z = y - x.v   and   z' = y - x.v'
    * ``transformed``:  z = y - x.v   and   z' = x.v'

    Both protocols consume exactly one latent sample per round and are
    statistically equivalent (the adapter functions below witness the
    reduction).  A session is single-owner and strictly sequential.
    """

    def __init__(self, instance, rng, protocol="standard", expose_latents=False, audit=False):
        if protocol not in ("standard", "transformed"):
            raise ValueError(f"unknown protocol {protocol!r}")
        self.instance = instance
        self.protocol = protocol
        self.rounds_used = 0
        self._rng = rng
        self._expose_latents = expose_latents
        self._latents = [] if expose_latents else None
        self._audit = [] if audit else None
        self._scale = instance.design.scale_vector(instance.d)

    # -- latent sampling ----------------------------------------------------

    def _draw_latent(self):
        d = self.instance.d
        x = self._rng.standard_normal(d) * self._scale
        eps = self.instance.sigma * float(self._rng.standard_normal())
        return x, eps

    def _draw_latent_block(self, n):
        d = self.instance.d
        block = self._rng.standard_normal((n, d + 1))
        xs = block[:, :d] * self._scale
        eps = self.instance.sigma * block[:, d]
        return xs, eps

    # -- query interface ----------------------------------------------------

    def query_pair(self, v, v_prime):
        """Answer one round for the query vectors (v, v')."""
        v = np.asarray(v, dtype=float)
        v_prime = np.asarray(v_prime, dtype=float)
        d = self.instance.d
        if v.shape != (d,) or v_prime.shape != (d,):
            raise ValueError(f"query vectors must have shape ({d},)")
        x, eps = self._draw_latent()
        y = float(x @ self.instance.theta_star) + eps
        z = y - float(x @ v)
        if self.protocol == "standard":
            z_prime = y - float(x @ v_prime)
        else:
            z_prime = float(x @ v_prime)
        self.rounds_used += 1
        if self._latents is not None:
            self._latents.append(_LatentRound(x=x, eps=eps))
        if self._audit is not None:
            self._audit.append(
                QueryRound(index=self.rounds_used, v=v.copy(), v_prime=v_prime.copy(), z=z, z_prime=z_prime)
            )
        return z, z_prime

    def query_pair_block(self, v, v_prime, n):
        """Answer ``n`` consecutive rounds with the same fixed pair (v, v').

        Bulk variant for non-adaptive uses (the vectors may not depend on
        the responses inside the block).  Consumes ``n`` latent samples.
        """
        v = np.asarray(v, dtype=float)
        v_prime = np.asarray(v_prime, dtype=float)
        xs, eps = self._draw_latent_block(n)
        ys = xs @ self.instance.theta_star + eps
        z = ys - xs @ v
        if self.protocol == "standard":
            z_prime = ys - xs @ v_prime
        else:
            z_prime = xs @ v_prime
        self.rounds_used += n
        if self._latents is not None:
            for i in range(n):
                self._latents.append(_LatentRound(x=xs[i], eps=float(eps[i])))
        if self._audit is not None:
            base = self.rounds_used - n
            for i in range(n):
                self._audit.append(
                    QueryRound(
                        index=base + i + 1,
                        v=v.copy(),
                        v_prime=v_prime.copy(),
                        z=float(z[i]),
                        z_prime=float(z_prime[i]),
                    )
                )
        return z, z_prime

    def query_single_block(self, v, n):
        """Answer ``n`` rounds with one informative query each (v' = 0).

        The second response of the standard protocol carries no information
        for v' = 0 beyond the first, so for Gaussian designs the responses
        are drawn directly from their exact conditional law
        N(0, sigma^2 + (theta - v)^T Q (theta - v)), one scalar per round.
        Test-mode sessions materialize the latent samples instead so the
        draws remain inspectable.
        """
        v = np.asarray(v, dtype=float)
        if self._expose_latents or self._audit is not None:
            z, _ = self.query_pair_block(v, np.zeros_like(v), n)
            return z
        gap = self.instance.theta_star - v
        var = self.instance.sigma**2 + float(gap @ self.instance.q @ gap)
        z = np.sqrt(var) * self._rng.standard_normal(n)
        self.rounds_used += n
        return z

    # -- inspection ----------------------------------------------------------

    @property
    def latents(self):
        """Latent (x, eps) rounds; available in test mode only."""
        if self._latents is None:
            raise RuntimeError("latent access requires a session built with expose_latents=True")
        return self._latents

    @property
    def audit_rounds(self):
        if self._audit is None:
            raise RuntimeError("audit log requires a session built with audit=True")
        return self._audit


def conditional_covariance(theta, v, v_prime, sigma):
    """Exact covariance of the transformed-protocol response pair.

    For standard-normal covariates and fixed query vectors, (z, z') is
    centered bivariate normal with covariance
    [[sigma^2 + |theta - v|^2, <theta - v, v'>], [<theta - v, v'>, |v'|^2]].
    """
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    v_prime = np.asarray(v_prime, dtype=float)
    gap = theta - v
    top = sigma**2 + float(gap @ gap)
    cross = float(gap @ v_prime)
    return np.array([[top, cross], [cross, float(v_prime @ v_prime)]])


def one_query_adapter(w, w_prime):
    """Map transformed-protocol query vectors into standard-protocol ones.

    Issuing (w + w', w - w') in the standard protocol lets the caller
    recover the transformed-protocol responses via
    :func:`one_query_map_back`; applying the adapter twice returns
    (2w, 2w').
    """
    w = np.asarray(w, dtype=float)
    w_prime = np.asarray(w_prime, dtype=float)
    return w + w_prime, w - w_prime


def one_query_map_back(z, z_prime):
    """Recover the transformed-protocol responses from standard ones.

    With queries from :func:`one_query_adapter`, (z + z')/2 is the residual
    response for w and (z' - z)/2 is the projection response for w'.
    """
    return (z + z_prime) / 2.0, (z_prime - z) / 2.0


def reveal_truth(instance):
    """Evaluation-only access to the hidden parameters.

    Only harness/evaluation code may call this; estimator code paths are
    kept free of any reference to it (enforced by a source-level test).
    """
    return instance.theta_star, instance.sigma, instance.q


def write_audit_csv(session, path):
    """Dump a session audit log: round, v[0..d), v_prime[0..d), z, z_prime."""
    rounds = session.audit_rounds
    d = session.instance.d
    header = (
        ["round"]
        + [f"v{i}" for i in range(d)]
        + [f"v_prime{i}" for i in range(d)]
        + ["z", "z_prime"]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rounds:
            writer.writerow(
                [row.index]
                + [repr(float(val)) for val in row.v]
                + [repr(float(val)) for val in row.v_prime]
                + [repr(float(row.z)), repr(float(row.z_prime))]
            )
