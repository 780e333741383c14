"""Response-prediction evaluation.

Voxelwise Pearson accuracy, synchrony threshold sweeps, response-lag
estimation by cross-validated ridge, and per-voxel significance with
Benjamini-Hochberg FDR control.

Conventions: correlations use population standard deviations; voxels whose
series have (numerically) zero variance are flagged degenerate, scored 0,
and excluded from multiple-comparison counts rather than producing NaN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .numerics import DEGENERATE_STD
from .ridge import RidgeConfig, ridge_cv_select

__all__ = [
    "DEFAULT_THRESHOLDS",
    "VoxelScoreMap",
    "ThresholdSweep",
    "pearson_per_voxel",
    "synchrony_map",
    "accuracy_threshold_sweep",
    "estimate_lag",
    "correlation_p_values",
    "benjamini_hochberg",
    "significance_mask",
]

# Fig. 2-style sweep: 0.15 through 0.75 in steps of 0.05.
DEFAULT_THRESHOLDS = tuple(round(0.15 + 0.05 * i, 10) for i in range(13))


@dataclass(frozen=True)
class VoxelScoreMap:
    scores: np.ndarray
    degenerate: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        d = np.asarray(self.degenerate, dtype=bool)
        if s.ndim != 1 or s.shape != d.shape:
            raise ValueError("scores and degenerate flags must be aligned 1-D arrays")
        ok = np.abs(s[~d]) <= 1.0 + 1e-12
        if not np.all(ok):
            raise ValueError("non-degenerate scores must lie in [-1, 1]")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "degenerate", d)

    def __len__(self) -> int:
        return self.scores.size


def _scores_of(x) -> np.ndarray:
    if isinstance(x, VoxelScoreMap):
        return x.scores
    return np.asarray(x, dtype=np.float64)


def _columnwise_pearson(a: np.ndarray, b: np.ndarray) -> VoxelScoreMap:
    am = a - a.mean(axis=0)
    bm = b - b.mean(axis=0)
    sa = a.std(axis=0)
    sb = b.std(axis=0)
    degenerate = (sa < DEGENERATE_STD) | (sb < DEGENERATE_STD)
    denom = np.where(degenerate, 1.0, sa * sb) * a.shape[0]
    r = np.clip((am * bm).sum(axis=0) / denom, -1.0, 1.0)
    r[degenerate] = 0.0
    return VoxelScoreMap(r, degenerate)


def pearson_per_voxel(predicted, measured) -> VoxelScoreMap:
    """Per-voxel Pearson r over time for two (T, V) matrices.

    Zero-variance voxels (either series) score 0 with the degenerate flag set.
    """
    p = np.atleast_2d(np.asarray(predicted, dtype=np.float64))
    m = np.atleast_2d(np.asarray(measured, dtype=np.float64))
    if p.shape != m.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {m.shape}")
    if p.shape[0] < 3:
        raise ValueError("need at least 3 time samples per voxel")
    return _columnwise_pearson(p, m)


def synchrony_map(group_a_mean, group_b_mean) -> VoxelScoreMap:
    """Per-voxel correlation between two pre-averaged group timecourses."""
    a = np.atleast_2d(np.asarray(group_a_mean, dtype=np.float64))
    b = np.atleast_2d(np.asarray(group_b_mean, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < 2:
        raise ValueError("need at least 2 time samples")
    return _columnwise_pearson(a, b)


@dataclass(frozen=True)
class ThresholdSweep:
    thresholds: tuple
    mean_scores: tuple  # None where the surviving voxel set is empty
    voxel_counts: tuple

    def rows(self):
        return list(zip(self.thresholds, self.voxel_counts, self.mean_scores))


def accuracy_threshold_sweep(scores, synchrony, thresholds=DEFAULT_THRESHOLDS) -> ThresholdSweep:
    """Mean score over voxels whose synchrony exceeds each threshold.

    Empty survivor sets yield mean None (explicit marker, never NaN).
    """
    s = _scores_of(scores)
    sync = _scores_of(synchrony)
    if s.shape != sync.shape:
        raise ValueError("scores and synchrony are misaligned")
    t = np.asarray(thresholds, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("thresholds must be a non-empty 1-D sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("thresholds must be strictly ascending")
    if t[0] < 0 or t[-1] >= 1:
        raise ValueError("thresholds must lie in [0, 1)")
    means, counts = [], []
    for thr in t:
        sel = sync > thr
        n = int(sel.sum())
        counts.append(n)
        means.append(float(s[sel].mean()) if n else None)
    return ThresholdSweep(tuple(float(x) for x in t), tuple(means), tuple(counts))


def _fold_mean_r(pred: np.ndarray, meas: np.ndarray) -> float:
    # fold-internal scorer: tolerate short folds (>= 2 rows), degenerate -> 0
    if pred.shape[0] < 2:
        raise ValueError("cross-validation folds are too small to correlate")
    return float(_columnwise_pearson(pred, meas).scores.mean())


def estimate_lag(features, responses, lags, ridge=None, frame_ids=None):
    """Pick the stimulus-to-response delay by cross-validated ridge fits.

    features: (N, D) one pooled vector per frame; responses: (T, V) with rows
    indexed by time step; lags: candidate integer delays. For each lag L the
    pairs are (features[i], responses[frame_ids[i] + L]), dropping frames whose
    lagged row falls past the end. Outer k-fold CV (contiguous folds, k from
    the ridge config) scores each lag by the mean over folds of the voxel-mean
    Pearson r; the inner lambda is selected per fold on its training portion.

    Returns (best_lag, results) with results a list of (lag, mean_r, std_r)
    in ascending lag order; ties go to the smaller lag.
    """
    cfg = ridge if ridge is not None else RidgeConfig()
    x = np.asarray(features, dtype=np.float64)
    r = np.asarray(responses, dtype=np.float64)
    if x.ndim != 2 or r.ndim != 2:
        raise ValueError("features must be (N, D) and responses (T, V)")
    ids = np.arange(x.shape[0]) if frame_ids is None else np.asarray(frame_ids, dtype=np.int64)
    if ids.shape != (x.shape[0],):
        raise ValueError("frame_ids must align with features rows")
    lag_list = sorted(int(l) for l in lags)
    if not lag_list:
        raise ValueError("need at least one candidate lag")
    if min(lag_list) < 0:
        raise ValueError("lags must be non-negative")
    t_total = r.shape[0]
    results = []
    best_lag, best_r = None, -np.inf
    for lag in lag_list:
        keep = ids + lag < t_total
        if keep.sum() < 2 * cfg.folds:
            raise ValueError(f"lag {lag} exhausts samples ({int(keep.sum())} pairs for {cfg.folds} folds)")
        xl = x[keep]
        yl = r[ids[keep] + lag]
        fold_scores = []
        folds = np.array_split(np.arange(xl.shape[0]), cfg.folds)
        for test_idx in folds:
            mask = np.ones(xl.shape[0], dtype=bool)
            mask[test_idx] = False
            inner = RidgeConfig(lambda_grid=cfg.lambda_grid, folds=min(cfg.folds, int(mask.sum())))
            _, (w, b) = ridge_cv_select(xl[mask], yl[mask], inner)
            pred = xl[test_idx] @ w + b
            fold_scores.append(_fold_mean_r(pred, yl[test_idx]))
        mean_r = float(np.mean(fold_scores))
        std_r = float(np.std(fold_scores))
        results.append((lag, mean_r, std_r))
        if mean_r > best_r:
            best_lag, best_r = lag, mean_r
    return best_lag, results


def correlation_p_values(scores, n_samples: int):
    """Two-sided p for the null of uncorrelatedness, per voxel.

    t = r sqrt((n-2)/(1-r^2)) against the t distribution with n-2 degrees of
    freedom; the tail mass comes from the regularized incomplete beta
    identity P(|T| >= t) = I(df/(df+t^2); df/2, 1/2). Degenerate voxels get
    p = NaN.
    """
    n = int(n_samples)
    if n < 4:
        raise ValueError("need at least 4 samples for a correlation test")
    if isinstance(scores, VoxelScoreMap):
        r = scores.scores
        degenerate = scores.degenerate
    else:
        r = np.asarray(scores, dtype=np.float64)
        degenerate = np.zeros(r.shape, dtype=bool)
    df = n - 2
    p = np.empty_like(r)
    saturated = np.abs(r) >= 1.0
    p[saturated] = 0.0
    ok = ~saturated
    t2 = df * r[ok] ** 2 / (1.0 - r[ok] ** 2)
    p[ok] = betainc(df / 2.0, 0.5, df / (df + t2))
    p[degenerate] = np.nan
    return p


def benjamini_hochberg(p_values, q: float) -> np.ndarray:
    """BH step-up rejection mask at level q; non-finite p-values never reject.

    m counts only the finite p-values. The largest k with p_(k) <= k q / m
    sets the rejection threshold.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    p = np.asarray(p_values, dtype=np.float64)
    flat = p.ravel()
    finite = np.isfinite(flat)
    m = int(finite.sum())
    mask = np.zeros(flat.shape, dtype=bool)
    if m:
        ps = np.sort(flat[finite])
        below = ps <= q * np.arange(1, m + 1) / m
        if below.any():
            cutoff = ps[np.flatnonzero(below)[-1]]
            mask = finite & (flat <= cutoff)
    return mask.reshape(p.shape)


def significance_mask(scores, n_samples: int, q: float = 0.05):
    """Per-voxel FDR-corrected significance of correlation scores.

    Returns (mask, p_values); degenerate voxels carry p = NaN and are never
    part of the corrected family.
    """
    p = correlation_p_values(scores, n_samples)
    return benjamini_hochberg(p, q), p
