"""Representational similarity analysis.

Dissimilarity matrices are pairwise Pearson correlation distances (1 - r)
between per-condition vectors, optionally after z-scoring each dimension
across conditions. Matrices are compared with Kendall's tau_A over their
strict upper triangles: tied pairs count as neither concordant nor
discordant but stay in the denominator n(n-1)/2.
"""

from __future__ import annotations

import numpy as np

from .numerics import DEGENERATE_STD

__all__ = [
    "build_rdm",
    "kendall_tau_a",
    "rsa_compare",
    "upper_triangle",
    "model_representations",
]


def build_rdm(vectors, normalize: bool = False) -> np.ndarray:
    """Correlation-distance RDM for a stack of condition vectors.

    vectors: (n, d) with n >= 2 conditions and d >= 2 dimensions, every row
    non-constant. normalize z-scores each dimension across conditions first
    (dimensions constant across conditions are dropped from the correlation
    rather than dividing by zero). Entries are clipped to [0, 2] and the
    diagonal is exactly 0.
    """
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError(f"vectors must be (n_conditions, dim), got shape {v.shape}")
    n, d = v.shape
    if n < 2 or d < 2:
        raise ValueError("need at least 2 conditions of length >= 2")
    if not np.all(np.isfinite(v)):
        raise ValueError("vectors contain non-finite values")
    if normalize:
        std = v.std(axis=0)
        keep = std >= DEGENERATE_STD
        if keep.sum() < 2:
            raise ValueError("fewer than 2 dimensions vary across conditions")
        v = (v[:, keep] - v[:, keep].mean(axis=0)) / std[keep]
    if np.any(v.std(axis=1) < DEGENERATE_STD):
        raise ValueError("constant condition vector; correlation distance undefined")
    centered = v - v.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered**2).sum(axis=1))
    r = (centered @ centered.T) / np.outer(norms, norms)
    rdm = np.clip(1.0 - r, 0.0, 2.0)
    np.fill_diagonal(rdm, 0.0)
    return rdm


def kendall_tau_a(x, y, chunk: int = 256) -> float:
    """tau_A = (concordant - discordant) / (n(n-1)/2) over all unordered pairs.

    Exact for any ties: the numerator is a sum of sign products in {-1,0,1},
    accumulated in chunks to bound memory at O(chunk * n).
    """
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.shape != ya.shape:
        raise ValueError("sequences must have equal length")
    n = xa.size
    if n < 2:
        raise ValueError("need at least 2 observations")
    total = 0.0
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        dx = np.sign(xa[lo:hi, None] - xa[None, :])
        dy = np.sign(ya[lo:hi, None] - ya[None, :])
        prod = dx * dy
        # keep each unordered pair once: global column index > global row index
        cols = np.arange(n)[None, :]
        rows = np.arange(lo, hi)[:, None]
        total += prod[cols > rows].sum()
    return float(total / (n * (n - 1) / 2))


def _check_rdm(m, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square")
    if a.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 conditions")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    if np.abs(a - a.T).max() > 1e-12:
        raise ValueError(f"{name} is not symmetric")
    if np.abs(np.diagonal(a)).max() > 0:
        raise ValueError(f"{name} has a nonzero diagonal")
    return a


def upper_triangle(rdm) -> np.ndarray:
    """Strict upper triangle in row-major order."""
    a = np.asarray(rdm, dtype=np.float64)
    iu = np.triu_indices(a.shape[0], k=1)
    return a[iu]


def rsa_compare(model_rdm, neural_rdm) -> float:
    """Kendall tau_A between the strict upper triangles of two RDMs."""
    a = _check_rdm(model_rdm, "model RDM")
    b = _check_rdm(neural_rdm, "neural RDM")
    if a.shape != b.shape:
        raise ValueError(f"RDM size mismatch: {a.shape} vs {b.shape}")
    return kendall_tau_a(upper_triangle(a), upper_triangle(b))


def model_representations(features, attentions=None, flatten: bool = False) -> np.ndarray:
    """Per-frame model vectors for RDM construction.

    Default: the pooled, attention-modulated feature vector per frame (the
    same quantity the encoder regresses from). flatten=True instead keeps the
    full modulated map per frame, flattened, for the map-level variant.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 4:
        raise ValueError(f"features must be (n, h, w, c), got shape {f.shape}")
    if attentions is None:
        modulated = f
    else:
        a = np.asarray(attentions, dtype=np.float64)
        if a.shape == f.shape[1:3]:
            a = np.broadcast_to(a, f.shape[:1] + a.shape)
        if a.shape != f.shape[:3]:
            raise ValueError(f"attention shape {a.shape} does not match features {f.shape[:3]}")
        modulated = f * a[..., None]
    if flatten:
        return modulated.reshape(f.shape[0], -1)
    return modulated.sum(axis=(1, 2))
