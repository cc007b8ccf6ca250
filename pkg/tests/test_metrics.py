import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanekit import io
from lanekit.geometry import ImageSpec, InvalidCurveError, LaneCurve, densify
from lanekit.metrics import (eval_culane, eval_tusimple, iou_matrix, mask_iou, match_count, rasterize_lane,
                             scaled_width)

from conftest import line, vline


@pytest.fixture
def four(data_dir):
    return io.read_lanes(data_dir / "four_lane_gt.json")


def test_tusimple_identity(four):
    rep = eval_tusimple([four.lanes], [four.lanes])
    assert (rep.accuracy, rep.fp_rate, rep.fn_rate) == (1.0, 0.0, 0.0)


def test_tusimple_shift_25(four, data_dir):
    pred = io.read_lanes(data_dir / "four_lane_pred_shift25.json")
    rep = eval_tusimple([pred.lanes], [four.lanes[:1]])
    assert (rep.accuracy, rep.fp_rate, rep.fn_rate) == (0.0, 1.0, 1.0)
    rep = eval_tusimple([pred.lanes], [four.lanes])
    assert (rep.accuracy, rep.fp_rate, rep.fn_rate) == (0.0, 1.0, 1.0)


def test_tusimple_nine_of_ten():
    rows = np.arange(100, 200, 10.0)
    gt = LaneCurve(np.column_stack([np.full(10, 300.0), rows]))
    xs = np.full(10, 305.0)
    xs[-1] = 340.0
    pred = LaneCurve(np.column_stack([xs, rows]))
    rep = eval_tusimple([[pred]], [[gt]])
    assert rep.accuracy == pytest.approx(0.9)
    assert rep.fp_rate == 0 and rep.fn_rate == 0


def test_tusimple_partial_prediction_counts_misses():
    rows = np.arange(100, 200, 10.0)
    gt = LaneCurve(np.column_stack([np.full(10, 300.0), rows]))
    pred = LaneCurve(np.array([[300.0, 100.0], [300.0, 150.0]]))  # covers 6 of 10 rows
    rep = eval_tusimple([[pred]], [[gt]])
    assert rep.accuracy == pytest.approx(0.6)
    assert rep.fp_rate == 1.0 and rep.fn_rate == 1.0


def test_tusimple_ratio_of_sums(four):
    short = [LaneCurve(np.array([[60.0, 100.0], [57.0, 110.0]]))]
    rep = eval_tusimple([four.lanes, []], [four.lanes, short])
    n_pts = sum(len(l) for l in four.lanes)
    assert rep.accuracy == pytest.approx(n_pts / (n_pts + 2))
    assert rep.fn_rate == pytest.approx(1 / 5)
    assert rep.fp_rate == 0
    assert len(rep.per_image) == 2


def test_tusimple_empty_image():
    rep = eval_tusimple([[]], [[]])
    assert (rep.accuracy, rep.fp_rate, rep.fn_rate) == (1.0, 0.0, 0.0)


def seg_dist(px, py, a, b):
    d = b - a
    t = 0.0 if not d.any() else min(1.0, max(0.0, ((px - a[0]) * d[0] + (py - a[1]) * d[1]) / (d @ d)))
    return float(np.hypot(px - a[0] - t * d[0], py - a[1] - t * d[1]))


def brute_raster(lane, spec, width):
    pts = densify(lane).points
    out = np.zeros(spec.shape, dtype=bool)
    for y in range(spec.height):
        for x in range(spec.width):
            out[y, x] = min(seg_dist(x, y, a, b) for a, b in zip(pts[:-1], pts[1:])) <= width / 2
    return out


@pytest.mark.parametrize("width", [1, 4, 7])
def test_rasterize_matches_brute_force(width):
    spec = ImageSpec(40, 30)
    lane = LaneCurve(np.array([[5.0, 3.0], [12.5, 14.2], [30.0, 26.0]]))
    np.testing.assert_array_equal(rasterize_lane(lane, spec, width), brute_raster(lane, spec, width))


def test_rasterize_vertical_width_30():
    spec = ImageSpec(200, 100)
    mask = rasterize_lane(vline(100.0, 10, 90), spec, 30)
    counts = mask[10:91].sum(axis=1)
    assert set(counts) <= {30, 31}
    mask = rasterize_lane(vline(100.5, 10, 90), spec, 30)
    assert set(mask[10:91].sum(axis=1)) <= {30, 31}


def test_rasterize_width_one_is_dense_pixels():
    spec = ImageSpec(50, 50)
    mask = rasterize_lane(vline(20, 5, 40), spec, 1)
    expected = np.zeros(spec.shape, dtype=bool)
    expected[5:41, 20] = True
    np.testing.assert_array_equal(mask, expected)


def test_rasterize_clips_at_edge():
    spec = ImageSpec(40, 40)
    mask = rasterize_lane(vline(0, 0, 39), spec, 30)
    assert mask.shape == (40, 40)
    assert mask[20, :16].all() and not mask[20, 16:].any()


def test_rasterize_degenerate():
    class Stub:
        points = np.array([[1.0, 1.0]])
    with pytest.raises(InvalidCurveError):
        rasterize_lane(Stub(), ImageSpec(10, 10), 3)


def test_mask_iou_one_third():
    a = np.zeros((4, 4), dtype=bool)
    b = np.zeros((4, 4), dtype=bool)
    a[0:2, 0:2] = True
    b[0:2, 1:3] = True
    assert mask_iou(a, b) == pytest.approx(1 / 3)
    assert mask_iou(a, b) == mask_iou(b, a)


def test_culane_identity(four):
    rep = eval_culane([four.lanes], [four.lanes], four.image)
    assert (rep.tp, rep.fp, rep.fn, rep.f1) == (4, 0, 0, 1.0)


def test_culane_disjoint(four):
    pred = [l.shifted(dx=80) for l in four.lanes[:1]]
    rep = eval_culane([pred], [four.lanes[:1]], four.image)
    assert (rep.tp, rep.fp, rep.fn, rep.f1) == (0, 1, 1, 0.0)


def test_culane_one_third_no_match():
    spec = ImageSpec(40, 20)
    a = vline(10.5, 0, 19)
    b = vline(11.5, 0, 19)
    # width 2: columns {10, 11} and {11, 12}, half of each overlaps
    assert iou_matrix([a], [b], spec, width=2)[0, 0] == pytest.approx(1 / 3)
    rep = eval_culane([[a]], [[b]], spec, width=2)
    assert (rep.tp, rep.fp, rep.fn) == (0, 1, 1)


def test_culane_aggregate_counts(four):
    preds = [four.lanes[:3], four.lanes + [four.lanes[0].shifted(dx=150)]]
    rep = eval_culane(preds, [four.lanes, four.lanes], four.image)
    assert (rep.tp, rep.fp, rep.fn) == (7, 1, 1)
    assert rep.precision == pytest.approx(7 / 8)
    assert rep.f1 == pytest.approx(7 / 8)


def test_spurious_prediction_monotone(four):
    base = eval_culane([four.lanes[:2]], [four.lanes], four.image)
    more = eval_culane([four.lanes[:2] + [four.lanes[0].shifted(dx=150)]], [four.lanes], four.image)
    assert more.precision <= base.precision and more.recall >= base.recall


def test_scaled_width():
    assert scaled_width(ImageSpec(1640, 590)) == 30
    assert scaled_width(ImageSpec(820, 295)) == 15


def brute_match(iou, thresh):
    n, m = iou.shape
    best = 0
    if n <= m:
        for perm in itertools.permutations(range(m), n):
            best = max(best, sum(iou[i, perm[i]] > thresh for i in range(n)))
    else:
        for perm in itertools.permutations(range(n), m):
            best = max(best, sum(iou[perm[j], j] > thresh for j in range(m)))
    return best


@settings(max_examples=300)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 2 ** 32 - 1))
def test_assignment_equals_permutation_search(n, m, seed):
    iou = np.random.default_rng(seed).choice([0.0, 0.3, 0.5, 0.51, 0.9], size=(n, m))
    assert match_count(iou, 0.5) == brute_match(iou, 0.5)


def all_binary_brute(n, m):
    """Every n x m 0/1 matrix and its best matching size by permutation search."""
    k = n * m
    mats = ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).reshape(-1, n, m)
    t = mats if n <= m else mats.transpose(0, 2, 1)
    a, b = min(n, m), max(n, m)
    perms = np.array(list(itertools.permutations(range(b), a)))
    best = t[:, np.arange(a)[None, :], perms].sum(-1).max(-1)
    return mats, best


@pytest.mark.parametrize("n,m", [(1, 4), (2, 3), (3, 2), (3, 3)])
def test_assignment_exhaustive_small(n, m):
    mats, best = all_binary_brute(n, m)
    assert [match_count(h.astype(float), 0.5) for h in mats] == best.tolist()
