"""Low-level numerical kernels shared by the rest of the package.

Conventions relied on everywhere:

* grids are 2-D float64 arrays indexed ``[row, col]``; x is the column
  coordinate, y the row coordinate
* "convolution" means cross-correlation (no kernel flip) with zero padding;
  Gaussian kernels are symmetric, so blurs are unaffected by the choice
* resampling aligns pixel centers: source position for output index i is
  ``(i + 0.5) * (n_in / n_out) - 0.5``, clamped to the valid range
* standard deviations are population standard deviations (divide by N)
* all arithmetic runs in float64
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "DEGENERATE_STD",
    "GaussianKernel",
    "gaussian_kernel2d",
    "gaussian_taps1d",
    "kernel_weights",
    "convolve2d_same",
    "correlate_same",
    "gaussian_blur",
    "resize_matrix",
    "bilinear_resize",
    "zscore",
]

# Below this, a standard deviation is treated as zero variance.
DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class GaussianKernel:
    """Odd-sized isotropic Gaussian tap grid, normalized to sum 1."""

    size: int
    sigma: float
    weights: np.ndarray


def gaussian_kernel2d(size: int, sigma: float) -> GaussianKernel:
    """Build a size x size Gaussian kernel with the peak at the center cell.

    Taps are exp(-(dx^2 + dy^2) / (2 sigma^2)) on integer offsets from the
    center, normalized so the grid sums to exactly 1.
    """
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be an odd positive integer, got {size}")
    if not sigma > 0:
        raise ValueError(f"kernel sigma must be positive, got {sigma}")
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    sq = ax[:, None] ** 2 + ax[None, :] ** 2
    w = np.exp(-sq / (2.0 * sigma * sigma))
    w /= w.sum()
    return GaussianKernel(size=size, sigma=float(sigma), weights=w)


def gaussian_taps1d(sigma: float, radius: int) -> np.ndarray:
    """1-D Gaussian taps on [-radius, radius], normalized to sum 1."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    t = np.exp(-(ax**2) / (2.0 * sigma * sigma))
    return t / t.sum()


def kernel_weights(kernel) -> np.ndarray:
    """Raw tap array for a GaussianKernel or a 2-D array; sides must be odd."""
    w = kernel.weights if isinstance(kernel, GaussianKernel) else np.asarray(kernel, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError(f"kernel must be 2-D, got shape {w.shape}")
    if w.shape[0] % 2 == 0 or w.shape[1] % 2 == 0:
        raise ValueError(f"kernel sides must be odd, got {w.shape}")
    return w


def correlate_same(arr: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Zero-padded same-shape cross-correlation over the last two axes.

    Accepts any leading batch axes. The kernel is applied as given (no flip).
    """
    a = np.asarray(arr, dtype=np.float64)
    w = kernel_weights(weights)
    kh, kw = w.shape
    pad = [(0, 0)] * (a.ndim - 2) + [(kh // 2, kh // 2), (kw // 2, kw // 2)]
    padded = np.pad(a, pad)
    win = sliding_window_view(padded, (kh, kw), axis=(-2, -1))
    return np.einsum("...kl,kl->...", win, w)


def convolve2d_same(grid, kernel) -> np.ndarray:
    """Same-shape 2-D cross-correlation of a single grid with zero padding."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError(f"grid must be 2-D, got shape {g.shape}")
    return correlate_same(g, kernel_weights(kernel))


def gaussian_blur(arr: np.ndarray, sigma, radius: int | None = None) -> np.ndarray:
    """Separable Gaussian blur of the last two axes with zero padding.

    ``sigma`` may be a scalar or a (sigma_rows, sigma_cols) pair. The default
    radius is ceil(4 sigma) per axis, wide enough that the truncated tail is
    negligible. Equivalent to correlate_same with the matching 2-D kernel.
    """
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim < 2:
        raise ValueError("gaussian_blur expects at least 2 dimensions")
    if np.isscalar(sigma):
        sig_r = sig_c = float(sigma)
    else:
        sig_r, sig_c = (float(s) for s in sigma)
    out = a
    for axis, sig in ((-2, sig_r), (-1, sig_c)):
        r = int(np.ceil(4.0 * sig)) if radius is None else int(radius)
        taps = gaussian_taps1d(sig, r)
        pad = [(0, 0)] * a.ndim
        pad[axis % a.ndim] = (r, r)
        padded = np.pad(out, pad)
        win = sliding_window_view(padded, taps.size, axis=axis)
        out = np.einsum("...k,k->...", win, taps)
    return out


def resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Linear interpolation weights mapping a length-n_in axis to n_out.

    Row i holds the source weights for output sample i under pixel-center
    alignment; every row is a convex combination (non-negative, sums to 1).
    """
    if n_in < 1 or n_out < 1:
        raise ValueError(f"resize dimensions must be positive, got {n_in} -> {n_out}")
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    lo = np.minimum(np.floor(src).astype(np.int64), max(n_in - 2, 0))
    frac = src - lo
    m = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    m[rows, lo] += 1.0 - frac
    m[rows, np.minimum(lo + 1, n_in - 1)] += frac
    return m


def bilinear_resize(grid, out_height: int, out_width: int) -> np.ndarray:
    """Bilinear resampling of a 2-D grid with pixel-center alignment."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError(f"grid must be 2-D, got shape {g.shape}")
    my = resize_matrix(g.shape[0], out_height)
    mx = resize_matrix(g.shape[1], out_width)
    return my @ g @ mx.T


def zscore(values) -> np.ndarray:
    """Standardize a 1-D sequence to mean 0, population std 1."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"zscore expects a 1-D sequence, got shape {v.shape}")
    if v.size < 2:
        raise ValueError("zscore needs at least two values")
    std = v.std()
    if std < DEGENERATE_STD:
        raise ValueError("zscore undefined for zero-variance input")
    return (v - v.mean()) / std
