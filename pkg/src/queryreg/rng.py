"""Deterministic, splittable random streams.

Every source of randomness in the package is an ``RngStream`` keyed by a
64-bit ``(seed, stream_id)`` pair.  Streams built from the same pair replay
the same sequence; streams with different ids are statistically independent,
so replicate ``r`` of an experiment can always use ``stream_id = r`` no
matter in which order (or on which worker) the replicates actually run.

Streams are backed by Philox, a counter-based generator, so construction is
cheap and there is no shared state between streams.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RngStream", "rng_stream", "sample_uniform_box"]


class RngStream:
    """A self-contained random stream identified by (seed, stream_id).

    Thin wrapper around a ``numpy.random.Generator``.  Draw methods advance
    an internal counter (the generator state); two freshly built streams
    with equal keys produce identical draw sequences.  A stream must not be
    shared between concurrent workers -- give each worker its own id.
    """

    def __init__(self, seed, stream_id=0, _key=None):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        if _key is None:
            _key = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._key = _key
        self.generator = np.random.Generator(np.random.Philox(_key))

    def child(self, tag):
        """Derive an independent sub-stream, deterministically keyed by ``tag``.

        Used to give distinct components of one replicate (e.g. the data
        source and the estimator) their own independent randomness.
        """
        key = np.random.SeedSequence(
            entropy=self.seed, spawn_key=self._key.spawn_key + (int(tag),)
        )
        stream = RngStream.__new__(RngStream)
        stream.seed = self.seed
        stream.stream_id = self.stream_id
        stream._key = key
        stream.generator = np.random.Generator(np.random.Philox(key))
        return stream

    # -- draw methods -------------------------------------------------------

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def rng_stream(seed, stream_id=0):
    """Build the random stream for the given (seed, stream_id) key."""
    return RngStream(seed, stream_id)


def sample_uniform_box(rng, d, half_width):
    """Draw one vector with i.i.d. components uniform on [-half_width, half_width].

    This is the perturbation noise that drives the zeroth-order update rule.
    """
    if half_width <= 0:
        raise ValueError(f"box half-width must be positive, got {half_width}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return rng.uniform(-half_width, half_width, d)
