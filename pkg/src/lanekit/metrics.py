"""TuSimple point accuracy and CULane mask-IoU F1."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import ImageSpec, InvalidCurveError, LaneCurve, sample_xs


@dataclass
class TusimpleReport:
    accuracy: float
    fp_rate: float
    fn_rate: float
    per_image: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "fp": self.fp_rate, "fn": self.fn_rate, "per_image": self.per_image}


@dataclass
class CulaneReport:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        if self.tp == 0:
            return 0.0
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


def _as_points(lane):
    return lane if isinstance(lane, LaneCurve) else LaneCurve(np.asarray(lane.points), id=0)


def lane_point_hits(pred: LaneCurve, gt: LaneCurve, pt_thresh: float = 20.0) -> np.ndarray:
    """Per gt sample row: does the prediction lie strictly within ``pt_thresh`` px?"""
    xp = sample_xs(pred, gt.ys)
    return np.isfinite(xp) & (np.abs(np.where(np.isfinite(xp), xp, np.inf) - gt.xs) < pt_thresh)


def eval_tusimple(preds: Sequence[Sequence[LaneCurve]], gts: Sequence[Sequence[LaneCurve]],
                  pt_thresh: float = 20.0, match_thresh: float = 0.85) -> TusimpleReport:
    """Point accuracy, FP and FN rates over a set of images.

    Each gt lane's vertices are its sample rows. Gt lanes are visited in order
    and take the unused prediction with the most hits (first one on ties); the
    pair is a true positive when the hit fraction reaches ``match_thresh``.
    """
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} prediction images vs {len(gts)} ground-truth images")
    hits_total = pts_total = fp_total = fn_total = n_pred = n_gt = 0
    per_image = []
    for pred, gt in zip(preds, gts):
        pred = [_as_points(p) for p in pred]
        used = [False] * len(pred)
        hits_img = pts_img = tp = 0
        for g in gt:
            best, best_hits = -1, -1
            for j, p in enumerate(pred):
                if used[j]:
                    continue
                nh = int(lane_point_hits(p, g, pt_thresh).sum())
                if nh > best_hits:
                    best, best_hits = j, nh
            pts_img += len(g)
            if best < 0:
                continue
            hits_img += best_hits
            if best_hits / len(g) >= match_thresh:
                used[best] = True
                tp += 1
        fp = len(pred) - tp
        fn = len(gt) - tp
        per_image.append({"accuracy": hits_img / pts_img if pts_img else 1.0,
                          "fp": fp, "fn": fn, "n_pred": len(pred), "n_gt": len(gt)})
        hits_total += hits_img
        pts_total += pts_img
        fp_total += fp
        fn_total += fn
        n_pred += len(pred)
        n_gt += len(gt)
    return TusimpleReport(
        accuracy=hits_total / pts_total if pts_total else 1.0,
        fp_rate=fp_total / n_pred if n_pred else 0.0,
        fn_rate=fn_total / n_gt if n_gt else 0.0,
        per_image=per_image,
    )


def _segment_distance(px, py, a, b):
    """Distance from pixel centres to segment ``a``-``b``."""
    d = b - a
    L2 = float(d @ d)
    if L2 == 0:
        return np.hypot(px - a[0], py - a[1])
    t = np.clip(((px - a[0]) * d[0] + (py - a[1]) * d[1]) / L2, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * d[0]), py - (a[1] + t * d[1]))


def rasterize_lane(lane: LaneCurve, spec: ImageSpec, width: float = 30) -> np.ndarray:
    """Boolean mask of pixels within ``width / 2`` of the polyline (round caps and joins)."""
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    pts = np.asarray(lane.points, dtype=np.float64)
    if len(pts) < 2:
        raise InvalidCurveError("need at least two points to rasterise")
    h, w = spec.shape
    mask = np.zeros((h, w), dtype=bool)
    r = width / 2.0
    for a, b in zip(pts[:-1], pts[1:]):
        x0 = max(int(np.floor(min(a[0], b[0]) - r)), 0)
        x1 = min(int(np.ceil(max(a[0], b[0]) + r)), w - 1)
        y0 = max(int(np.floor(min(a[1], b[1]) - r)), 0)
        y1 = min(int(np.ceil(max(a[1], b[1]) + r)), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        py, px = np.mgrid[y0:y1 + 1, x0:x1 + 1]
        mask[y0:y1 + 1, x0:x1 + 1] |= _segment_distance(px, py, a, b) <= r
    return mask


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    return float(np.logical_and(a, b).sum() / union) if union else 0.0


def iou_matrix(preds: Sequence[LaneCurve], gts: Sequence[LaneCurve], spec: ImageSpec, width: float = 30) -> np.ndarray:
    pm = [rasterize_lane(p, spec, width).ravel() for p in preds]
    gm = [rasterize_lane(g, spec, width).ravel() for g in gts]
    if not pm or not gm:
        return np.zeros((len(pm), len(gm)))
    P = np.stack(pm).astype(np.int64)
    G = np.stack(gm).astype(np.int64)
    inter = P @ G.T
    union = P.sum(1)[:, None] + G.sum(1)[None, :] - inter
    return np.where(union > 0, inter / np.maximum(union, 1), 0.0)


def match_count(iou: np.ndarray, iou_thresh: float = 0.5) -> int:
    """Largest number of one-to-one pairs with IoU above the threshold."""
    if iou.size == 0:
        return 0
    hit = (iou > iou_thresh).astype(np.int64)
    r, c = linear_sum_assignment(hit, maximize=True)
    return int(hit[r, c].sum())


def eval_culane(preds: Sequence[Sequence[LaneCurve]], gts: Sequence[Sequence[LaneCurve]], spec: ImageSpec,
                iou_thresh: float = 0.5, width: float = 30) -> CulaneReport:
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} prediction images vs {len(gts)} ground-truth images")
    tp = fp = fn = 0
    for pred, gt in zip(preds, gts):
        pred = [_as_points(p) for p in pred]
        m = match_count(iou_matrix(pred, gt, spec, width), iou_thresh)
        tp += m
        fp += len(pred) - m
        fn += len(gt) - m
    return CulaneReport(tp, fp, fn)


def scaled_width(spec: ImageSpec, base_width: float = 30, base_size: tuple[int, int] = (1640, 590)) -> float:
    """Mask width rescaled from the native 1640x590 benchmark resolution."""
    return base_width * spec.width / base_size[0]
