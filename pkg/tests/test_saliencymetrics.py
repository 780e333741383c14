"""Five gaze-prediction metrics against brute-force pair counting."""

import math

import numpy as np
import pytest

from attnenc.saliencymetrics import (
    FixationSet,
    aggregate_metrics,
    evaluate_prediction,
    fixation_density_map,
    metric_auc,
    metric_cc,
    metric_nss,
    metric_sauc,
    metric_sim,
    shuffled_negatives,
)


def auc_oracle(values, pos_cells, pos_counts, neg_cells):
    """Every positive-negative pair, ties half, multiplicity expands positives."""
    wins = 0.0
    total = 0.0
    for (pr, pc), count in zip(pos_cells, pos_counts):
        for nr, nc in neg_cells:
            pv, nv = values[pr, pc], values[nr, nc]
            if pv > nv:
                wins += count
            elif pv == nv:
                wins += 0.5 * count
            total += count
    return wins / total


def _fixset(cells, counts, height, width, frame_id=0):
    return FixationSet(
        frame_id=frame_id,
        cells=np.asarray(cells, dtype=np.int64),
        counts=np.asarray(counts, dtype=np.int64),
        height=height,
        width=width,
    )


# ---------------------------------------------------------------------- SIM


def test_sim_identical_maps():
    rng = np.random.default_rng(70)
    p = rng.uniform(0.1, 1.0, (5, 6))
    assert metric_sim(p, p) == pytest.approx(1.0, abs=1e-12)


def test_sim_disjoint_support():
    p = np.array([[1.0, 0.0], [0.0, 0.0]])
    q = np.array([[0.0, 0.0], [0.0, 1.0]])
    assert metric_sim(p, q) == 0.0


def test_sim_hand_example():
    # min(0.5, 0.25) + min(0.5, 0.75) = 0.75
    assert metric_sim(np.array([[0.5, 0.5]]), np.array([[0.25, 0.75]])) == pytest.approx(0.75, abs=1e-15)


def test_sim_symmetric():
    rng = np.random.default_rng(71)
    for _ in range(10):
        p = rng.uniform(0, 1, (4, 4))
        q = rng.uniform(0, 1, (4, 4))
        assert metric_sim(p, q) == pytest.approx(metric_sim(q, p), abs=1e-14)


def test_sim_shifts_to_min_zero_before_normalizing():
    # a negative-valued map is valid after the documented min shift
    p = np.array([[-1.0, 0.0], [1.0, 2.0]])
    q = np.array([[2.0, 1.0], [0.0, -1.0]])
    got = metric_sim(p, q)
    ps = (p - p.min()) / (p - p.min()).sum()
    qs = (q - q.min()) / (q - q.min()).sum()
    assert got == pytest.approx(np.minimum(ps, qs).sum(), abs=1e-14)


def test_sim_zero_mass_error():
    with pytest.raises(ValueError, match="zero mass"):
        metric_sim(np.zeros((2, 2)), np.ones((2, 2)))


# ----------------------------------------------------------------------- CC


def test_cc_identical_and_inverted():
    rng = np.random.default_rng(72)
    p = rng.uniform(0, 1, (6, 7))
    assert metric_cc(p, p) == pytest.approx(1.0, abs=1e-12)
    assert metric_cc(p, -2.0 * p + 5.0) == pytest.approx(-1.0, abs=1e-12)


def test_cc_hand_example():
    # same centered arithmetic as the response-correlation example
    p = np.array([[0.0, 1.0], [2.0, 3.0]])
    q = np.array([[0.0, 1.0], [1.0, 3.0]])
    assert metric_cc(p, q) == pytest.approx(4.5 / math.sqrt(5.0 * 4.75), rel=1e-14)


def test_cc_constant_map_error():
    with pytest.raises(ValueError, match="constant"):
        metric_cc(np.full((3, 3), 2.0), np.random.default_rng(73).uniform(0, 1, (3, 3)))


# ---------------------------------------------------------------------- NSS


def test_nss_two_cell_example():
    # [0, 1] z-scores to (-1, +1); fixation on the high cell
    pred = np.array([[0.0, 1.0]])
    fix = _fixset([[0, 1]], [1], 1, 2)
    assert metric_nss(pred, fix) == pytest.approx(1.0, abs=1e-12)


def test_nss_every_cell_once_is_zero():
    rng = np.random.default_rng(74)
    pred = rng.uniform(0, 5, (3, 4))
    cells = [[r, c] for r in range(3) for c in range(4)]
    fix = _fixset(cells, [1] * 12, 3, 4)
    assert metric_nss(pred, fix) == pytest.approx(0.0, abs=1e-12)


def test_nss_multiplicity_raises_weighted_mean():
    rng = np.random.default_rng(75)
    pred = rng.uniform(0, 1, (4, 4))
    best = np.unravel_index(np.argmax(pred), pred.shape)
    worst = np.unravel_index(np.argmin(pred), pred.shape)
    lo = metric_nss(pred, _fixset([best, worst], [1, 1], 4, 4))
    hi = metric_nss(pred, _fixset([best, worst], [2, 1], 4, 4))
    assert hi > lo


def test_nss_affine_invariant():
    rng = np.random.default_rng(76)
    pred = rng.uniform(0, 1, (5, 5))
    fix = _fixset([[0, 0], [2, 3], [4, 4]], [1, 2, 1], 5, 5)
    base = metric_nss(pred, fix)
    assert metric_nss(3.7 * pred + 11.0, fix) == pytest.approx(base, abs=1e-10)


def test_nss_positive_against_own_density():
    # fixations drawn from the map's own density: positive at 3 sigma
    rng = np.random.default_rng(77)
    h, w = 8, 10
    raw = rng.uniform(0.0, 1.0, (h, w)) ** 2
    density = raw / raw.sum()
    trials, n_fix = 300, 12
    vals = []
    flat = density.ravel()
    for _ in range(trials):
        draws = rng.choice(h * w, size=n_fix, p=flat)
        cells, counts = np.unique(draws, return_counts=True)
        fix = _fixset(np.stack(np.divmod(cells, w), axis=1), counts, h, w)
        vals.append(metric_nss(density, fix))
    vals = np.array(vals)
    sem = vals.std(ddof=1) / math.sqrt(trials)
    assert vals.mean() > 3.0 * sem


def test_nss_errors():
    with pytest.raises(ValueError, match="constant"):
        metric_nss(np.ones((2, 2)), _fixset([[0, 0]], [1], 2, 2))


# ---------------------------------------------------------------------- AUC


def test_auc_perfect_separation():
    pred = np.array([[0.9, 0.8], [0.1, 0.2]])
    fix = _fixset([[0, 0], [0, 1]], [1, 1], 2, 2)
    assert metric_auc(pred, fix) == 1.0


def test_auc_constant_map_is_half():
    fix = _fixset([[0, 1]], [1], 2, 3)
    assert metric_auc(np.full((2, 3), 0.7), fix) == 0.5


def test_auc_hand_example():
    # positives at cells 1 and 3 of [0.9, 0.8, 0.1, 0.2]: pairs
    # (0.8 vs 0.9) lose, (0.8 vs 0.1) win, (0.2 vs 0.9) lose, (0.2 vs 0.1) win
    pred = np.array([[0.9, 0.8, 0.1, 0.2]])
    fix = _fixset([[0, 1], [0, 3]], [1, 1], 1, 4)
    assert metric_auc(pred, fix) == 0.5


def test_auc_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(78)
    for _ in range(200):
        pred = rng.uniform(0, 1, (8, 8))
        if rng.random() < 0.5:
            pred = np.round(pred, 1)  # force ties
        n_pos = int(rng.integers(1, 20))
        flat = rng.choice(64, size=n_pos, replace=False)
        cells = np.stack(np.divmod(flat, 8), axis=1)
        counts = rng.integers(1, 4, size=n_pos)
        fix = _fixset(cells, counts, 8, 8)
        pos_set = {tuple(c) for c in cells}
        negs = [(r, c) for r in range(8) for c in range(8) if (r, c) not in pos_set]
        expected = auc_oracle(pred, cells, counts, negs)
        assert metric_auc(pred, fix) == pytest.approx(expected, abs=1e-12)


def test_auc_affine_invariant():
    rng = np.random.default_rng(79)
    pred = rng.uniform(0, 1, (6, 6))
    fix = _fixset([[1, 1], [4, 2]], [2, 1], 6, 6)
    base = metric_auc(pred, fix)
    assert metric_auc(0.3 * pred + 9.0, fix) == pytest.approx(base, abs=1e-14)


def test_auc_needs_both_classes():
    cells = [[r, c] for r in range(2) for c in range(2)]
    with pytest.raises(ValueError, match="at least one negative"):
        metric_auc(np.ones((2, 2)), _fixset(cells, [1] * 4, 2, 2))


# --------------------------------------------------------------------- sAUC


def test_sauc_hand_example():
    pred = np.array([[0.3, 0.5, 0.4, 0.9]])
    fix = _fixset([[0, 1]], [1], 1, 4)
    shuffled = _fixset([[0, 0], [0, 2]], [1, 1], 1, 4)
    assert metric_sauc(pred, fix, shuffled) == 1.0


def test_sauc_overlapping_positives_excluded():
    pred = np.array([[0.3, 0.5, 0.4, 0.9]])
    fix = _fixset([[0, 1]], [1], 1, 4)
    # cell 1 sits in both sets; negatives reduce to {0, 2}
    shuffled = _fixset([[0, 0], [0, 1], [0, 2]], [1, 5, 1], 1, 4)
    assert metric_sauc(pred, fix, shuffled) == 1.0
    only_overlap = _fixset([[0, 1]], [3], 1, 4)
    with pytest.raises(ValueError, match="negative"):
        metric_sauc(pred, fix, only_overlap)


def test_sauc_chance_for_shared_distribution():
    # positives and negatives drawn from the same center-biased density over
    # a constant-shape prediction: near 0.5 over many frames
    rng = np.random.default_rng(80)
    h, w = 10, 12
    yy, xx = np.mgrid[0:h, 0:w]
    center = np.exp(-((yy - 4.5) ** 2 + (xx - 5.5) ** 2) / 12.0)
    density = (center / center.sum()).ravel()
    vals = []
    for _ in range(200):
        pos = rng.choice(h * w, size=6, p=density)
        neg = rng.choice(h * w, size=30, p=density)
        pc, cnt = np.unique(pos, return_counts=True)
        pos_cells = np.stack(np.divmod(pc, w), axis=1)
        neg_cells = np.stack(np.divmod(np.unique(neg), w), axis=1)
        fix = _fixset(pos_cells, cnt, h, w)
        shuf = _fixset(neg_cells, np.ones(len(neg_cells), dtype=int), h, w)
        try:
            vals.append(metric_sauc(center, fix, shuf))
        except ValueError:
            continue  # all negatives overlapped the positives
    mean = float(np.mean(vals))
    assert abs(mean - 0.5) < 0.05


def test_shuffled_negatives_union_of_other_frames():
    sets = [
        _fixset([[0, 0], [1, 1]], [1, 1], 3, 3, frame_id=0),
        _fixset([[1, 1], [2, 2]], [2, 1], 3, 3, frame_id=1),
        _fixset([[0, 2]], [1], 3, 3, frame_id=2),
    ]
    merged = shuffled_negatives(sets, 0)
    assert merged.cell_tuples() == {(1, 1), (2, 2), (0, 2)}
    merged2 = shuffled_negatives(sets, 2)
    assert merged2.cell_tuples() == {(0, 0), (1, 1), (2, 2)}


# ------------------------------------------------- fixation sets & plumbing


def test_fixation_set_from_points_bins_and_counts():
    # stimulus 100x200 onto a 10x20 grid: cell = floor(coord / 10)
    fs = FixationSet.from_points(
        7,
        [(15.0, 12.0), (19.9, 18.0), (150.0, 95.0)],
        10,
        20,
        domain_height=100,
        domain_width=200,
    )
    assert fs.frame_id == 7
    assert fs.cell_tuples() == {(1, 1), (9, 15)}
    by_cell = {tuple(c): n for c, n in zip(fs.cells, fs.counts)}
    assert by_cell[(1, 1)] == 2 and by_cell[(9, 15)] == 1


def test_fixation_set_validation():
    with pytest.raises(ValueError, match="bounds"):
        _fixset([[5, 0]], [1], 4, 4)
    with pytest.raises(ValueError, match="unique"):
        _fixset([[1, 1], [1, 1]], [1, 1], 4, 4)
    with pytest.raises(ValueError, match="multiplicities"):
        _fixset([[1, 1]], [0], 4, 4)


def test_fixation_density_map_normalized():
    fs = _fixset([[2, 3], [5, 8]], [3, 1], 10, 12)
    d = fixation_density_map(fs, 1.5)
    assert d.shape == (10, 12)
    assert d.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.unravel_index(np.argmax(d), d.shape) == (2, 3)


# --------------------------------------------------------------- evaluation


def test_evaluate_prediction_density_scale():
    rng = np.random.default_rng(81)
    h, w = 6, 8
    raw = rng.uniform(0.05, 1.0, (h, w))
    density = raw / raw.sum()
    fix = _fixset([[1, 2], [4, 5]], [1, 2], h, w)
    truth = fixation_density_map(fix, 1.0)
    rows = dict(evaluate_prediction(density, fix, truth_map=truth, scale="density"))
    assert set(rows) == {"SIM", "CC", "NSS", "AUC", "sAUC"} - {"sAUC"}
    # rank metrics must be computed on log density, SIM on the density itself
    logp = np.log(density + 1e-12)
    assert rows["NSS"] == pytest.approx(metric_nss(logp, fix), abs=1e-12)
    assert rows["AUC"] == pytest.approx(metric_auc(logp, fix), abs=1e-12)
    assert rows["SIM"] == pytest.approx(metric_sim(density, truth), abs=1e-12)
    assert rows["CC"] == pytest.approx(metric_cc(logp, truth), abs=1e-12)


def test_evaluate_prediction_rejects_bad_density():
    fix = _fixset([[0, 0]], [1], 2, 2)
    with pytest.raises(ValueError, match="density"):
        evaluate_prediction(np.full((2, 2), 0.5), fix, scale="density")


def test_evaluate_prediction_resizes_to_fixation_grid():
    rng = np.random.default_rng(82)
    pred = rng.uniform(0, 1, (3, 4))
    fix = _fixset([[2, 3], [8, 10]], [1, 1], 12, 16)
    rows = dict(evaluate_prediction(pred, fix, scale="arbitrary"))
    assert "AUC" in rows and "NSS" in rows


def test_evaluate_prediction_lenient_mode_drops_undefined():
    fix = _fixset([[0, 1]], [1], 2, 3)
    flat = np.full((2, 3), 0.25)
    rows = dict(evaluate_prediction(flat, fix, scale="arbitrary", strict=False))
    assert rows["AUC"] == 0.5  # defined even on a constant map
    assert "NSS" not in rows  # undefined, silently omitted in lenient mode
    with pytest.raises(ValueError):
        evaluate_prediction(flat, fix, scale="arbitrary")


def test_aggregate_metrics_mean_and_sem():
    per_frame = [
        {"AUC": 0.6, "NSS": 1.0},
        {"AUC": 0.8, "NSS": 2.0},
        {"AUC": 0.7},
    ]
    agg = {name: (mean, sem, n) for name, mean, sem, n in aggregate_metrics(per_frame)}
    assert agg["AUC"][0] == pytest.approx(0.7)
    assert agg["AUC"][2] == 3
    expected_sem = np.std([0.6, 0.8, 0.7], ddof=1) / math.sqrt(3)
    assert agg["AUC"][1] == pytest.approx(expected_sem)
    assert agg["NSS"][0] == pytest.approx(1.5)
    assert agg["NSS"][2] == 2
