"""Attention maps over feature grids.

A saliency map is computed from an (H, W, C) feature stack by a channel-mixing
spatial filter, rectification, and a small Gaussian blur; a spatial softmax
turns it into an attention map (non-negative, sums to 1). Attention maps can
also be built directly from gaze: a kernel density estimate over all recorded
fixations (global center bias), or a per-frame blurred fixation count map.

Fixation coordinates are continuous stimulus pixels, x in [0, width) and
y in [0, height), with x mapping to columns and y to rows. Sigmas for gaze
densities are in stimulus pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .numerics import (
    GaussianKernel,
    bilinear_resize,
    correlate_same,
    gaussian_blur,
    gaussian_kernel2d,
)

__all__ = [
    "ATTENTION_SUM_TOL",
    "FixationTable",
    "channel_conv_same",
    "saliency_forward",
    "spatial_softmax",
    "modulate_and_pool",
    "require_attention_map",
    "kde_density_map",
    "kde_log_density",
    "center_attention_map",
    "gaze_attention_map",
]

ATTENTION_SUM_TOL = 1e-9

_DEFAULT_BLUR = gaussian_kernel2d(5, 1.0)


@dataclass
class FixationTable:
    """Columnar gaze records: one row per fixation, bounds half-open."""

    frame_id: np.ndarray
    subject_id: np.ndarray
    x: np.ndarray
    y: np.ndarray
    stimulus_height: int
    stimulus_width: int
    _by_frame: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.frame_id = np.asarray(self.frame_id, dtype=np.int64)
        self.subject_id = np.asarray(self.subject_id, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        n = self.frame_id.size
        if not (self.subject_id.size == self.x.size == self.y.size == n):
            raise ValueError("fixation columns must have equal length")
        if self.stimulus_height < 1 or self.stimulus_width < 1:
            raise ValueError("stimulus dimensions must be positive")
        if n and (self.frame_id.min() < 0 or self.subject_id.min() < 0):
            raise ValueError("frame and subject ids must be non-negative")
        if n and not (
            np.all(self.x >= 0)
            and np.all(self.x < self.stimulus_width)
            and np.all(self.y >= 0)
            and np.all(self.y < self.stimulus_height)
        ):
            raise ValueError("fixation coordinates out of stimulus bounds")
        self._by_frame = {}
        for i, fid in enumerate(self.frame_id):
            self._by_frame.setdefault(int(fid), []).append(i)

    def __len__(self) -> int:
        return int(self.frame_id.size)

    @property
    def frames(self) -> list[int]:
        return sorted(self._by_frame)

    def points_for_frame(self, frame_id: int) -> np.ndarray:
        """(K, 2) array of (x, y) for one frame; empty (0, 2) if unseen."""
        idx = self._by_frame.get(int(frame_id), [])
        return np.column_stack([self.x[idx], self.y[idx]]) if idx else np.empty((0, 2))

    def all_points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def subset(self, frame_ids) -> "FixationTable":
        wanted = set(int(f) for f in frame_ids)
        keep = np.array([int(f) in wanted for f in self.frame_id], dtype=bool)
        return FixationTable(
            self.frame_id[keep],
            self.subject_id[keep],
            self.x[keep],
            self.y[keep],
            self.stimulus_height,
            self.stimulus_width,
        )


def channel_conv_same(features, kernel) -> np.ndarray:
    """Spatial cross-correlation of (..., H, W, C) features with a (kh, kw, C)
    kernel, summed over channels. Zero padded, output (..., H, W)."""
    f = np.asarray(features, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    if f.ndim < 3:
        raise ValueError(f"features must be at least (H, W, C), got shape {f.shape}")
    if k.ndim != 3:
        raise ValueError(f"kernel must be (kh, kw, C), got shape {k.shape}")
    if k.shape[2] != f.shape[-1]:
        raise ValueError(f"kernel channels {k.shape[2]} do not match features {f.shape[-1]}")
    kh, kw = k.shape[:2]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel spatial size must be odd, got {(kh, kw)}")
    pad = [(0, 0)] * (f.ndim - 3) + [(kh // 2, kh // 2), (kw // 2, kw // 2), (0, 0)]
    padded = np.pad(f, pad)
    win = sliding_window_view(padded, (kh, kw), axis=(-3, -2))
    return np.einsum("...ckl,klc->...", win, k)


def saliency_forward(features, attention_kernel, blur: GaussianKernel | None = None) -> np.ndarray:
    """Raw saliency: blur(relu(channel_conv(features, kernel))).

    The blur defaults to a 5x5 Gaussian with sigma 1 and stays fixed during
    training; only the channel-mixing kernel is a trainable quantity.
    """
    s = channel_conv_same(features, attention_kernel)
    s = np.maximum(s, 0.0)
    return correlate_same(s, (blur or _DEFAULT_BLUR).weights)


def spatial_softmax(saliency) -> np.ndarray:
    """Softmax over the last two axes, stabilized by max subtraction."""
    s = np.asarray(saliency, dtype=np.float64)
    if s.ndim < 2:
        raise ValueError(f"saliency must be at least 2-D, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("saliency contains non-finite values")
    m = s.max(axis=(-2, -1), keepdims=True)
    e = np.exp(s - m)
    return e / e.sum(axis=(-2, -1), keepdims=True)


def modulate_and_pool(features, attention=None) -> np.ndarray:
    """Attention-weighted spatial sum of a feature stack.

    With ``attention`` None the features are summed unweighted, which equals
    uniform attention scaled by the cell count. Output is (..., C).
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim < 3:
        raise ValueError(f"features must be at least (H, W, C), got shape {f.shape}")
    if attention is None:
        return f.sum(axis=(-3, -2))
    a = np.asarray(attention, dtype=np.float64)
    if a.shape[-2:] != f.shape[-3:-1]:
        raise ValueError(f"attention shape {a.shape} does not match feature grid {f.shape[-3:-1]}")
    return np.einsum("...hw,...hwc->...c", a, f)


def require_attention_map(a, tol: float = ATTENTION_SUM_TOL) -> np.ndarray:
    """Validate an (H, W) attention map: finite, non-negative, sums to 1."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"attention map must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("attention map contains non-finite values")
    if m.min() < 0:
        raise ValueError(f"attention map has negative mass ({m.min()})")
    if abs(m.sum() - 1.0) > tol:
        raise ValueError(f"attention map sums to {m.sum()}, expected 1")
    return m


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return np.empty((0, 2))
    pts = np.atleast_2d(pts)
    if pts.shape[1] != 2:
        raise ValueError(f"points must be (N, 2) (x, y) pairs, got shape {pts.shape}")
    return pts


def kde_density_map(
    points,
    sigma: float,
    out_height: int,
    out_width: int,
    domain_height: float | None = None,
    domain_width: float | None = None,
    truncate_sigmas: float | None = None,
) -> np.ndarray:
    """Gaussian KDE of (x, y) points, evaluated at cell centers.

    density(p) = (1/N) sum_k exp(-|p - g_k|^2 / (2 sigma^2)) / (2 pi sigma^2)

    The output grid divides [0, domain_width) x [0, domain_height) into
    out_width x out_height cells; the domain defaults to the output size so
    centers sit at (col + 0.5, row + 0.5). Evaluation is exact by default;
    ``truncate_sigmas`` zeroes per-axis contributions beyond that many sigmas.
    """
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise ValueError("kde needs at least one point")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if out_height < 1 or out_width < 1:
        raise ValueError("output grid dimensions must be positive")
    dh = float(out_height if domain_height is None else domain_height)
    dw = float(out_width if domain_width is None else domain_width)
    xs = (np.arange(out_width) + 0.5) * (dw / out_width)
    ys = (np.arange(out_height) + 0.5) * (dh / out_height)
    dx2 = (xs[None, :] - pts[:, 0:1]) ** 2
    dy2 = (ys[None, :] - pts[:, 1:2]) ** 2
    inv = 1.0 / (2.0 * sigma * sigma)
    ex = np.exp(-dx2 * inv)
    ey = np.exp(-dy2 * inv)
    if truncate_sigmas is not None:
        lim = (truncate_sigmas * sigma) ** 2
        ex[dx2 > lim] = 0.0
        ey[dy2 > lim] = 0.0
    dens = np.einsum("nh,nw->hw", ey, ex)
    return dens / (2.0 * np.pi * sigma * sigma * pts.shape[0])


def kde_log_density(points, sigma: float, eval_points, chunk: int = 1024) -> np.ndarray:
    """Log KDE density at arbitrary (x, y) positions, via logsumexp."""
    pts = _as_points(points)
    ev = _as_points(eval_points)
    if pts.shape[0] == 0:
        raise ValueError("kde needs at least one point")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    inv = 1.0 / (2.0 * sigma * sigma)
    const = np.log(2.0 * np.pi * sigma * sigma * pts.shape[0])
    out = np.empty(ev.shape[0])
    for start in range(0, ev.shape[0], chunk):
        block = ev[start : start + chunk]
        d2 = (block[:, 0:1] - pts[None, :, 0]) ** 2 + (block[:, 1:2] - pts[None, :, 1]) ** 2
        expo = -d2 * inv
        m = expo.max(axis=1, keepdims=True)
        out[start : start + chunk] = m[:, 0] + np.log(np.exp(expo - m).sum(axis=1)) - const
    return out


def center_attention_map(
    train_fixations: FixationTable,
    val_fixations: FixationTable,
    sigma_candidates,
    grid_height: int,
    grid_width: int,
) -> tuple[np.ndarray, float]:
    """Global center-bias attention map with data-driven bandwidth.

    Builds a KDE over every training fixation for each candidate sigma, keeps
    the sigma with the highest mean log density of the validation fixations,
    evaluates that density at the feature-grid cell centers (mapped into
    stimulus pixel space) and renormalizes to sum 1.
    """
    cands = [float(s) for s in sigma_candidates]
    if not cands:
        raise ValueError("need at least one sigma candidate")
    if any(s <= 0 for s in cands):
        raise ValueError("sigma candidates must be positive")
    if len(train_fixations) == 0 or len(val_fixations) == 0:
        raise ValueError("center attention needs non-empty train and validation fixations")
    train_pts = train_fixations.all_points()
    val_pts = val_fixations.all_points()
    scores = [kde_log_density(train_pts, s, val_pts).mean() for s in cands]
    best = cands[int(np.argmax(scores))]
    dens = kde_density_map(
        train_pts,
        best,
        grid_height,
        grid_width,
        domain_height=train_fixations.stimulus_height,
        domain_width=train_fixations.stimulus_width,
    )
    total = dens.sum()
    if not total > 0:
        raise ValueError("center density has no mass on the grid")
    return dens / total, best


def gaze_attention_map(
    points,
    sigma: float,
    grid_height: int,
    grid_width: int,
    stimulus_height: int,
    stimulus_width: int,
    fallback: np.ndarray | None = None,
) -> np.ndarray:
    """Per-frame attention from recorded fixations.

    Splats fixation counts bilinearly onto the stimulus pixel grid (so the
    count map is centered on the true positions, not their floors), blurs
    with a Gaussian of the given sigma (in pixels), resizes bilinearly to the
    feature grid, clamps and renormalizes. Frames without fixations fall back
    to the supplied map (normally the center-bias map); with no fallback they
    are an error.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    pts = _as_points(points)
    if pts.shape[0] == 0:
        if fallback is not None:
            return require_attention_map(fallback)
        raise ValueError("frame has no fixations and no fallback map was given")
    if (
        pts[:, 0].min() < 0
        or pts[:, 1].min() < 0
        or pts[:, 0].max() >= stimulus_width
        or pts[:, 1].max() >= stimulus_height
    ):
        raise ValueError("fixations fall outside the stimulus bounds")
    # pixel index i holds the cell centered at coordinate i + 0.5
    col_pos = pts[:, 0] - 0.5
    row_pos = pts[:, 1] - 0.5
    c0 = np.floor(col_pos).astype(np.int64)
    r0 = np.floor(row_pos).astype(np.int64)
    fc = col_pos - c0
    fr = row_pos - r0
    counts = np.zeros((stimulus_height, stimulus_width))
    for dr in (0, 1):
        for dc in (0, 1):
            w = (fr if dr else 1.0 - fr) * (fc if dc else 1.0 - fc)
            rr = np.clip(r0 + dr, 0, stimulus_height - 1)
            cc = np.clip(c0 + dc, 0, stimulus_width - 1)
            np.add.at(counts, (rr, cc), w)
    blurred = gaussian_blur(counts, sigma)
    small = np.maximum(bilinear_resize(blurred, grid_height, grid_width), 0.0)
    total = small.sum()
    if not total > 0:
        raise ValueError("gaze density lost all mass during resampling")
    return small / total
