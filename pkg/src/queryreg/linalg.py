"""Dense symmetric-matrix helpers shared across the package.

Everything here operates on plain numpy arrays; dimensions in the
simulations stay in the hundreds at most, so dense routines are both the
simplest and the fastest option.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "require_symmetric",
    "spectral_norm",
    "spectral_norm_power_iteration",
    "max_eigenvalue",
    "is_psd",
]

_EIG_CUTOFF = 64  # direct symmetric eigensolve up to this size, power iteration beyond


def require_symmetric(m, rtol=1e-12, what="matrix"):
    """Validate that ``m`` is square and symmetric within relative tolerance."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square, got shape {m.shape}")
    scale = max(np.max(np.abs(m)), 1.0)
    if np.max(np.abs(m - m.T)) > rtol * scale:
        raise ValueError(f"{what} is not symmetric within rtol={rtol}")
    return m


def _power_top_psd(g, tol=1e-10, max_iter=10_000):
    """Largest eigenvalue of a PSD matrix by power iteration."""
    n = g.shape[0]
    x = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(max_iter):
        y = g @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        lam_next = float(x @ (g @ x))
        if abs(lam_next - lam) <= tol * max(abs(lam_next), 1.0):
            return max(lam_next, 0.0)
        lam = lam_next
    return max(lam, 0.0)


def max_eigenvalue(m):
    """Largest (signed) eigenvalue of a symmetric matrix."""
    m = require_symmetric(m)
    if m.shape[0] <= _EIG_CUTOFF:
        return float(np.linalg.eigvalsh(m)[-1])
    # shift to a PSD matrix so power iteration cannot oscillate between
    # eigenvalues of equal magnitude and opposite sign
    shift = float(np.max(np.sum(np.abs(m), axis=1)))
    return _power_top_psd(m + shift * np.eye(m.shape[0])) - shift


def spectral_norm(m):
    """Spectral norm (largest singular value) of a square matrix."""
    m = np.asarray(m, dtype=float)
    scale = max(np.max(np.abs(m)), 1.0)
    symmetric = m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - m.T)) <= 1e-12 * scale
    if symmetric and m.shape[0] <= _EIG_CUTOFF:
        w = np.linalg.eigvalsh(m)
        return float(max(abs(w[0]), abs(w[-1])))
    gram = m.T @ m
    if gram.shape[0] <= _EIG_CUTOFF:
        top = float(np.linalg.eigvalsh(gram)[-1])
    else:
        top = _power_top_psd(gram)
    return float(np.sqrt(max(top, 0.0)))


def spectral_norm_power_iteration(m, tol=1e-10, max_iter=10_000):
    """Spectral norm by power iteration on the Gram matrix.

    Kept separate from :func:`spectral_norm` so that tests can exercise the
    iterative route regardless of matrix size.
    """
    m = np.asarray(m, dtype=float)
    return float(np.sqrt(_power_top_psd(m.T @ m, tol=tol, max_iter=max_iter)))


def is_psd(m, tol=1e-10):
    """True if the symmetric matrix has no eigenvalue below ``-tol`` (relative)."""
    m = require_symmetric(m, rtol=max(tol, 1e-12))
    return bool(np.linalg.eigvalsh(m)[0] >= -tol * max(np.max(np.abs(m)), 1.0))
