"""Saliency evaluation: SIM, CC, NSS, AUC, and shuffled AUC.

Fixations are integerized to grid cells with multiplicity counts. AUC and
sAUC use the exact Mann-Whitney formulation (ties count one half); sAUC
negatives are the deduplicated union of the other frames' fixated cells with
the current frame's cells removed. Predictions at a different resolution are
bilinear-resized to the fixation grid before scoring, and density-scale
predictions are compared as log(p + 1e-12) everywhere except SIM, which
stays on the density scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DEGENERATE_STD, bilinear_resize, gaussian_blur

__all__ = [
    "LOG_EPS",
    "PREDICTION_SCALES",
    "METRIC_ORDER",
    "FixationSet",
    "metric_sim",
    "metric_cc",
    "metric_nss",
    "metric_auc",
    "metric_sauc",
    "shuffled_negatives",
    "fixation_density_map",
    "evaluate_prediction",
    "aggregate_metrics",
]

LOG_EPS = 1e-12
PREDICTION_SCALES = ("density", "log_density", "arbitrary")
METRIC_ORDER = ("SIM", "CC", "NSS", "AUC", "sAUC")


@dataclass(frozen=True)
class FixationSet:
    """Fixated grid cells for one frame: unique (row, col) pairs plus counts."""

    frame_id: int
    cells: np.ndarray
    counts: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 2)
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if cells.shape[0] != counts.shape[0]:
            raise ValueError("cells and counts must align")
        if counts.size and counts.min() < 1:
            raise ValueError("multiplicities must be >= 1")
        if cells.size:
            if cells.min() < 0 or cells[:, 0].max() >= self.height or cells[:, 1].max() >= self.width:
                raise ValueError("fixated cells out of grid bounds")
            if np.unique(cells, axis=0).shape[0] != cells.shape[0]:
                raise ValueError("cells must be unique (use counts for multiplicity)")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_points(cls, frame_id, points_xy, height, width, domain_height=None, domain_width=None):
        """Integerize (x, y) fixation points onto an height x width grid.

        Points live in [0, domain_width) x [0, domain_height) (defaults: the
        grid itself); cell = (floor(y * height / dh), floor(x * width / dw)).
        """
        pts = np.asarray(points_xy, dtype=np.float64).reshape(-1, 2)
        dh = height if domain_height is None else domain_height
        dw = width if domain_width is None else domain_width
        if pts.size:
            if pts[:, 0].min() < 0 or pts[:, 0].max() >= dw or pts[:, 1].min() < 0 or pts[:, 1].max() >= dh:
                raise ValueError("fixation points out of stimulus bounds")
            rows = np.floor(pts[:, 1] * (height / dh)).astype(np.int64)
            cols = np.floor(pts[:, 0] * (width / dw)).astype(np.int64)
            cells, counts = np.unique(np.stack([rows, cols], axis=1), axis=0, return_counts=True)
        else:
            cells = np.empty((0, 2), dtype=np.int64)
            counts = np.empty(0, dtype=np.int64)
        return cls(frame_id=int(frame_id), cells=cells, counts=counts, height=int(height), width=int(width))

    def __len__(self) -> int:
        return int(self.counts.sum())

    def cell_tuples(self) -> set:
        return {(int(r), int(c)) for r, c in self.cells}


def _as_grid(m, name="map") -> np.ndarray:
    g = np.asarray(m, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError(f"{name} contains non-finite values")
    return g


def _check_fixation_grid(pred: np.ndarray, fx: FixationSet) -> None:
    if pred.shape != (fx.height, fx.width):
        raise ValueError(f"prediction shape {pred.shape} does not match fixation grid {(fx.height, fx.width)}")
    if len(fx) == 0:
        raise ValueError("fixation set is empty")


def _shift_normalize(g: np.ndarray, name: str) -> np.ndarray:
    # lift only maps that dip below zero; subtracting a positive min would
    # collapse constant maps to zero mass
    shifted = g - min(float(g.min()), 0.0)
    total = shifted.sum()
    if total <= 0:
        raise ValueError(f"{name} has zero mass after shifting to min 0")
    return shifted / total


def metric_sim(pred, truth_map) -> float:
    """Histogram intersection of the two maps after shift-to-0 and sum-normalization."""
    p = _as_grid(pred, "prediction")
    q = _as_grid(truth_map, "truth map")
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    return float(np.minimum(_shift_normalize(p, "prediction"), _shift_normalize(q, "truth map")).sum())


def metric_cc(pred, truth_map) -> float:
    """Pearson correlation of the two maps as flat vectors."""
    p = _as_grid(pred, "prediction").ravel()
    q = _as_grid(truth_map, "truth map").ravel()
    if p.shape != q.shape:
        raise ValueError("shape mismatch")
    sp, sq = p.std(), q.std()
    if sp < DEGENERATE_STD or sq < DEGENERATE_STD:
        raise ValueError("correlation undefined for a constant map")
    r = float(((p - p.mean()) * (q - q.mean())).mean() / (sp * sq))
    return min(1.0, max(-1.0, r))


def metric_nss(pred, fixations: FixationSet) -> float:
    """Multiplicity-weighted mean of the z-scored prediction at fixated cells."""
    p = _as_grid(pred, "prediction")
    _check_fixation_grid(p, fixations)
    std = p.std()
    if std < DEGENERATE_STD:
        raise ValueError("NSS undefined for a constant prediction")
    z = (p - p.mean()) / std
    vals = z[fixations.cells[:, 0], fixations.cells[:, 1]]
    return float(np.average(vals, weights=fixations.counts))


def _mann_whitney_auc(pos_values, pos_weights, neg_values) -> float:
    neg = np.sort(np.asarray(neg_values, dtype=np.float64))
    pos = np.asarray(pos_values, dtype=np.float64)
    w = np.asarray(pos_weights, dtype=np.float64)
    below = np.searchsorted(neg, pos, side="left")
    upto = np.searchsorted(neg, pos, side="right")
    u = np.sum(w * (below + 0.5 * (upto - below)))
    return float(u / (w.sum() * neg.size))


def metric_auc(pred, fixations: FixationSet) -> float:
    """Mann-Whitney AUC: fixated cells (weighted by multiplicity) vs all other cells."""
    p = _as_grid(pred, "prediction")
    _check_fixation_grid(p, fixations)
    mask = np.zeros(p.shape, dtype=bool)
    mask[fixations.cells[:, 0], fixations.cells[:, 1]] = True
    neg = p[~mask]
    if neg.size == 0:
        raise ValueError("every cell is fixated; AUC needs at least one negative")
    pos = p[fixations.cells[:, 0], fixations.cells[:, 1]]
    return _mann_whitney_auc(pos, fixations.counts, neg)


def metric_sauc(pred, fixations: FixationSet, shuffled: FixationSet) -> float:
    """AUC with negatives restricted to other frames' fixated cells (deduplicated)."""
    p = _as_grid(pred, "prediction")
    _check_fixation_grid(p, fixations)
    if (shuffled.height, shuffled.width) != (fixations.height, fixations.width):
        raise ValueError("shuffled negatives live on a different grid")
    neg_cells = shuffled.cell_tuples() - fixations.cell_tuples()
    if not neg_cells:
        raise ValueError("no shuffled negatives remain after removing this frame's fixations")
    rows, cols = zip(*sorted(neg_cells))
    neg = p[np.asarray(rows), np.asarray(cols)]
    pos = p[fixations.cells[:, 0], fixations.cells[:, 1]]
    return _mann_whitney_auc(pos, fixations.counts, neg)


def shuffled_negatives(fixation_sets, frame_index: int) -> FixationSet:
    """Union of every other frame's fixated cells, deduplicated, counts all 1."""
    sets = list(fixation_sets)
    if not 0 <= frame_index < len(sets):
        raise ValueError("frame_index out of range")
    target = sets[frame_index]
    cells = set()
    for i, fx in enumerate(sets):
        if i == frame_index:
            continue
        if (fx.height, fx.width) != (target.height, target.width):
            raise ValueError("fixation sets live on different grids")
        cells |= fx.cell_tuples()
    arr = np.asarray(sorted(cells), dtype=np.int64).reshape(-1, 2)
    return FixationSet(
        frame_id=target.frame_id,
        cells=arr,
        counts=np.ones(arr.shape[0], dtype=np.int64),
        height=target.height,
        width=target.width,
    )


def fixation_density_map(fixations: FixationSet, sigma) -> np.ndarray:
    """Blurred, sum-normalized count map; the truth map for SIM/CC."""
    if len(fixations) == 0:
        raise ValueError("fixation set is empty")
    counts = np.zeros((fixations.height, fixations.width))
    counts[fixations.cells[:, 0], fixations.cells[:, 1]] = fixations.counts
    blurred = np.maximum(gaussian_blur(counts, sigma), 0.0)
    return blurred / blurred.sum()


def evaluate_prediction(
    pred, fixations: FixationSet, truth_map=None, scale="arbitrary", shuffled=None, strict=True
) -> dict:
    """Score one predicted map against one frame's fixations.

    The prediction is resized to the fixation grid when shapes differ.
    scale="density" converts to log(p + eps) for CC/NSS/AUC/sAUC and keeps
    the density for SIM; scale="log_density" uses the map as-is for ranking
    and a normalized exp for SIM; scale="arbitrary" uses the raw map for
    everything. SIM and CC require truth_map; sAUC requires shuffled.

    strict=False drops metrics that are undefined for this frame (constant
    prediction, zero mass, no surviving negatives) instead of raising, so a
    batch run can keep what is computable; AUC of a constant map is still a
    well-defined 0.5.
    """
    if scale not in PREDICTION_SCALES:
        raise ValueError(f"unknown prediction scale {scale!r}")
    p = _as_grid(pred, "prediction")
    if p.shape != (fixations.height, fixations.width):
        p = bilinear_resize(p, fixations.height, fixations.width)
    if scale == "density":
        if p.min() < 0 or abs(p.sum() - 1.0) > 1e-6:
            raise ValueError("density-scale prediction must be nonnegative and sum to 1")
        rank_map = np.log(p + LOG_EPS)
        sim_map = p
    elif scale == "log_density":
        rank_map = p
        sim_map = np.exp(p - p.max())
        sim_map = sim_map / sim_map.sum()
    else:
        rank_map = p
        sim_map = p
    if truth_map is not None:
        t = _as_grid(truth_map, "truth map")
        if t.shape != p.shape:
            raise ValueError(f"truth map shape {t.shape} does not match fixation grid {p.shape}")

    def run(fn, *fnargs):
        if strict:
            return fn(*fnargs)
        try:
            return fn(*fnargs)
        except ValueError:
            return None

    out = {}
    if truth_map is not None:
        out["SIM"] = run(metric_sim, sim_map, t)
        out["CC"] = run(metric_cc, rank_map, t)
    out["NSS"] = run(metric_nss, rank_map, fixations)
    out["AUC"] = run(metric_auc, rank_map, fixations)
    if shuffled is not None:
        out["sAUC"] = run(metric_sauc, rank_map, fixations, shuffled)
    return {k: v for k, v in out.items() if v is not None}


def aggregate_metrics(per_frame) -> list:
    """Mean and standard error per metric over frames: (metric, mean, sem, n)."""
    rows = []
    for name in METRIC_ORDER:
        vals = np.asarray([m[name] for m in per_frame if name in m], dtype=np.float64)
        if vals.size == 0:
            continue
        sem = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        rows.append((name, float(vals.mean()), sem, int(vals.size)))
    return rows
