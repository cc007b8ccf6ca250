"""Exit criteria. Each test records one PASS/FAIL line shown in the terminal summary."""
import itertools
import math
import time

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from lanekit import io
from lanekit.bench import run_bench
from lanekit.decoder import DecoderConfig, efficient_decode, greedy_decode
from lanekit.encoder import EncoderConfig, encode
from lanekit.geometry import ImageSpec, LaneCurve, sample_xs
from lanekit.losses import LossConfig, heatmap_loss, total_loss
from lanekit.metrics import eval_culane, eval_tusimple, iou_matrix, mask_iou, match_count
from lanekit.synth import NoiseSpec, SceneSpec, gen_scene, perturb, render_ideal

IMG = ImageSpec(976, 590)
N_SCENES = 200


def scene(seed, **kw):
    return gen_scene(SceneSpec(image=IMG, seed=seed, **kw))


def point_errors(lanes, curves):
    """Horizontal error of each decoded point against the lane's best-matching true curve.

    A decoded lane is assigned the true curve with the smallest mean gap over
    the rows they share; points outside that curve's span are not scored.
    """
    out = []
    for lane in lanes:
        best = None
        for c in curves:
            d = np.abs(sample_xs(c, lane.ys) - lane.xs)
            d = d[np.isfinite(d)]
            if len(d) and (best is None or d.mean() < best.mean()):
                best = d
        if best is not None:
            out.extend(best)
    return np.asarray(out)


def match_lanes(a, b):
    """Pair lanes of two decodings by mean horizontal gap on shared rows."""
    cost = np.full((len(a), len(b)), 1e6)
    for i, la in enumerate(a):
        for j, lb in enumerate(b):
            _, ia, ib = np.intersect1d(la.ys, lb.ys, return_indices=True)
            if len(ia):
                cost[i, j] = np.abs(la.xs[ia] - lb.xs[ib]).mean()
    return list(zip(*linear_sum_assignment(cost))) if cost.size else []


@pytest.fixture(scope="module")
def clean_runs():
    runs = []
    t0 = time.perf_counter()
    for s in range(N_SCENES):
        curves = scene(s)
        logits = render_ideal(curves, IMG)
        runs.append((curves, logits, greedy_decode(logits)))
    greedy_elapsed = time.perf_counter() - t0
    return runs, greedy_elapsed


def test_c1_round_trip(clean_runs, criterion):
    runs, elapsed = clean_runs
    exact = sum(len(g) == len(c) for c, _, g in runs)
    errs = np.concatenate([point_errors(g, c) for c, _, g in runs])
    families = {len(c) for c, _, _ in runs}
    ok = exact / N_SCENES >= 0.99 and errs.mean() < 1.0 and elapsed < 60 and families == {1, 2, 3, 4, 5}
    criterion("C1 round-trip recovery", ok,
              f"count exact {exact}/{N_SCENES}, mean err {errs.mean():.4f} px, {elapsed:.1f} s")
    assert ok


def test_c2_decoder_equivalence(clean_runs, criterion):
    runs, _ = clean_runs
    count_eq = 0
    within = total = 0
    for curves, logits, g in runs:
        e = efficient_decode(logits)
        count_eq += len(e) == len(g)
        for i, j in match_lanes(g, e):
            _, ia, ib = np.intersect1d(g[i].ys, e[j].ys, return_indices=True)
            d = np.abs(g[i].xs[ia] - e[j].xs[ib])
            within += int((d <= 1.0).sum())
            total += len(d)
    frac = within / total
    ok = count_eq == N_SCENES and frac >= 0.99
    criterion("C2 decoder equivalence", ok, f"counts equal {count_eq}/{N_SCENES}, points within 1 px {frac:.4%}")
    assert ok


def test_c3_loss_correctness(criterion):
    cfg = LossConfig()
    checks = []
    # idealised prediction on synthetic scenes
    for s in range(5):
        curves = scene(s)
        gt = encode(curves, IMG)
        ideal = render_ideal(curves, IMG)
        ideal.score = (gt.heat == 1.0).astype(float)
        checks.append(abs(total_loss(ideal, gt, curves, cfg).total) <= 1e-9)
    # hand-derived values
    checks.append(abs(heatmap_loss(np.array([[0.5]]), np.array([[1.0]]), cfg) - 0.25 * math.log(2)) <= 1e-6)
    checks.append(abs(heatmap_loss(np.array([[1.0, 0.2]]), np.array([[1.0, 0.5]]), cfg) - 5.5786e-4) <= 1e-6)
    checks.append(abs((1 + 0.02 * 3) - 1.06) <= 1e-6)
    hand_ok = all(checks)

    channels = {
        "score": ("heat_loss", NoiseSpec(score_noise_sd=0.1)),
        "dropout": ("heat_loss", NoiseSpec(dropout_prob=0.3)),
        "up": ("loss_up", NoiseSpec(offset_noise_sd=1.0, offset_channels=("up",))),
        "mid": ("loss_mid", NoiseSpec(offset_noise_sd=1.0, offset_channels=("mid",))),
        "down": ("loss_down", NoiseSpec(offset_noise_sd=1.0, offset_channels=("down",))),
    }
    wins = dict.fromkeys(channels, 0)
    for t in range(50):
        curves = scene(1000 + t)
        gt = encode(curves, IMG)
        base_logits = render_ideal(curves, IMG)
        base = total_loss(base_logits, gt, curves, cfg)
        for name, (field, noise) in channels.items():
            noisy = perturb(base_logits, NoiseSpec(**{**noise.__dict__, "seed": t}))
            rep = total_loss(noisy, gt, curves, cfg)
            wins[name] += getattr(rep, field) > getattr(base, field)
    ok = hand_ok and all(v == 50 for v in wins.values())
    criterion("C3 loss correctness", ok, f"ideal/hand checks {sum(checks)}/{len(checks)}, increases {wins}")
    assert ok


def test_c4_coarse_to_fine(criterion):
    better = 0
    n = 100
    for s in range(n):
        curves = scene(2000 + s)
        logits = perturb(render_ideal(curves, IMG),
                         NoiseSpec(offset_noise_sd=2.0, offset_channels=("up", "down"), seed=s))
        with_ref = point_errors(greedy_decode(logits), curves).mean()
        without = point_errors(greedy_decode(logits, refine=False), curves).mean()
        better += with_ref < without
    ok = better / n >= 0.95
    criterion("C4 coarse-to-fine benefit", ok, f"refinement better on {better}/{n} scenes")
    assert ok


def test_c5_metric_fixtures(data_dir, criterion):
    four = io.read_lanes(data_dir / "four_lane_gt.json")
    shifted = io.read_lanes(data_dir / "four_lane_pred_shift25.json")
    rows = np.arange(100, 200, 10.0)
    gt10 = LaneCurve(np.column_stack([np.full(10, 300.0), rows]))
    xs = np.full(10, 305.0)
    xs[-1] = 340.0
    pred9 = LaneCurve(np.column_stack([xs, rows]))

    r_id = eval_tusimple([four.lanes], [four.lanes])
    r_25 = eval_tusimple([shifted.lanes], [four.lanes[:1]])
    r_9 = eval_tusimple([[pred9]], [[gt10]])
    c_id = eval_culane([four.lanes], [four.lanes], four.image)
    a = LaneCurve(np.array([[10.5, 0.0], [10.5, 19.0]]))
    b = LaneCurve(np.array([[11.5, 0.0], [11.5, 19.0]]))
    third = iou_matrix([a], [b], ImageSpec(40, 20), width=2)[0, 0]
    c_third = eval_culane([[a]], [[b]], ImageSpec(40, 20), width=2)
    box_a = np.zeros((4, 4), bool)
    box_b = np.zeros((4, 4), bool)
    box_a[:2, :2] = box_b[:2, 1:3] = True

    fixtures = [
        (r_id.accuracy, r_id.fp_rate, r_id.fn_rate) == (1.0, 0.0, 0.0),
        (r_25.accuracy, r_25.fp_rate, r_25.fn_rate) == (0.0, 1.0, 1.0),
        abs(r_9.accuracy - 0.9) < 1e-12 and r_9.fn_rate == 0,
        (c_id.tp, c_id.fp, c_id.fn, c_id.f1) == (4, 0, 0, 1.0),
        abs(third - 1 / 3) < 1e-12 and (c_third.tp, c_third.fp, c_third.fn) == (0, 1, 1),
        abs(mask_iou(box_a, box_b) - 1 / 3) < 1e-12,
    ]

    # every 0/1 matrix up to 4x4: thresholding reduces any IoU matrix to one of these
    assign_ok = True
    for n, m in itertools.product(range(1, 5), repeat=2):
        k = n * m
        mats = ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).reshape(-1, n, m)
        t = mats if n <= m else mats.transpose(0, 2, 1)
        lo, hi = min(n, m), max(n, m)
        perms = np.array(list(itertools.permutations(range(hi), lo)))
        brute = t[:, np.arange(lo)[None, :], perms].sum(-1).max(-1)
        got = np.array([match_count(h * 0.9, 0.5) for h in mats])
        assign_ok &= bool(np.array_equal(got, brute))
    ok = all(fixtures) and assign_ok
    criterion("C5 metric fixtures", ok, f"fixtures {sum(fixtures)}/{len(fixtures)}, assignment exhaustive {assign_ok}")
    assert ok


def test_c6_performance_direction(criterion):
    cfg = io.RunConfig(scene=SceneSpec(image=ImageSpec(976, 590), seed=0), bench=io.BenchConfig(n_scenes=20, repeats=3, n_lanes=4))
    res = run_bench(cfg)
    g, e = res["greedy"]["median_ms"], res["efficient"]["median_ms"]
    ok = e <= g
    criterion("C6 performance direction", ok,
              f"greedy {g:.3f} ms, efficient {e:.3f} ms, ratio {res['speedup']:.2f}x (reported, not gated)")
    assert ok


def test_c7_format_golden(tmp_path, data_dir, criterion):
    rng = np.random.default_rng(0)
    arr = rng.normal(size=(4, 37, 53)).astype(np.float32)
    arr[0, 0, :3] = [np.nan, np.inf, -0.0]
    p = tmp_path / "x.lkt"
    io.write_tensor(p, arr)
    raw = p.read_bytes()
    io.write_tensor(tmp_path / "y.lkt", io.read_tensor(p))
    tensor_ok = (io.read_tensor(p).tobytes() == arr.tobytes() and (tmp_path / "y.lkt").read_bytes() == raw
                 and raw[:6] == b"LKT1\x01\x03" and len(raw) == 16 + 12 + arr.nbytes)

    lf = io.LaneFile(IMG, scene(7))
    io.write_lanes(tmp_path / "l.json", lf)
    back = io.read_lanes(tmp_path / "l.json")
    lanes_ok = back.lanes == lf.lanes and back.image == lf.image

    parsers = []
    parsers.append(io.parse_culane_annotation(["100 590 110 580 120 570"])[0].points.tolist()
                   == [[120, 570], [110, 580], [100, 590]])
    parsers.append(io.parse_culane_annotation([]) == [])
    parsers.append(len(io.parse_culane_annotation((data_dir / "culane_sample.lines.txt").read_text())) == 3)
    try:
        io.parse_culane_annotation(["100 590 110"])
        parsers.append(False)
    except io.FormatError:
        parsers.append(True)
    rec = {"lanes": [[-2, -2, 300, 310], [-2] * 4], "h_samples": [160, 170, 180, 190]}
    parsed = io.parse_tusimple_record(rec)
    parsers.append(len(parsed) == 1 and parsed[0].points.tolist() == [[300, 180], [310, 190]])
    try:
        io.parse_tusimple_record({"lanes": [[1, 2]], "h_samples": [1, 2, 3]})
        parsers.append(False)
    except io.FormatError:
        parsers.append(True)
    ok = tensor_ok and lanes_ok and all(parsers)
    criterion("C7 format golden tests", ok, f"tensor {tensor_ok}, lanes {lanes_ok}, parsers {sum(parsers)}/{len(parsers)}")
    assert ok
