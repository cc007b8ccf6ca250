"""Training objective evaluated as pure numpy functions.

Heatmap head: penalty-reduced focal loss. Offset head: L1 on the up/down
neighbours plus a coarse-to-fine L1 on the same-row offset read at the
positions decoded from the up/down predictions. All sums use numpy's pairwise
reduction in C order, so results are reproducible run to run.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoder import GroundTruthMaps, keypoint_pixels
from .geometry import InvalidConfigError, LaneCurve

EPS = 1e-12


class UndefinedLossError(ValueError):
    pass


class EmptySupervisionWarning(UserWarning):
    pass


@dataclass
class LogitMaps:
    """Network output stand-in: post-sigmoid score plus three offset planes (pixels)."""

    score: np.ndarray
    off_up: np.ndarray
    off_mid: np.ndarray
    off_down: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(a) for a in (self.score, self.off_up, self.off_mid, self.off_down)}
        if len(shapes) != 1 or len(next(iter(shapes))) != 2:
            raise ValueError(f"logit planes must share one 2-D shape, got {shapes}")

    @property
    def shape(self):
        return self.score.shape

    def stack(self) -> np.ndarray:
        return np.stack([self.score, self.off_up, self.off_mid, self.off_down])

    @classmethod
    def from_stack(cls, planes: np.ndarray) -> "LogitMaps":
        if planes.ndim != 3 or planes.shape[0] != 4:
            raise ValueError(f"expected (4, H, W) planes, got {planes.shape}")
        return cls(*(np.asarray(p, dtype=np.float64) for p in planes))

    def copy(self) -> "LogitMaps":
        return LogitMaps(self.score.copy(), self.off_up.copy(), self.off_mid.copy(), self.off_down.copy())


@dataclass(frozen=True)
class LossConfig:
    beta: float = 4.0
    gamma: float = 2.0
    lam: float = 0.02
    dy: int = 10

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0 or self.lam < 0:
            raise InvalidConfigError("beta, gamma and lam must be non-negative")
        if self.dy < 1:
            raise InvalidConfigError(f"dy must be >= 1, got {self.dy}")


@dataclass
class LossReport:
    heat_loss: float
    loss_up: float
    loss_down: float
    loss_mid: float
    total: float
    n_pos: int
    empty_mask: bool = False

    def as_dict(self) -> dict:
        return {
            "heat_loss": self.heat_loss,
            "loss_up": self.loss_up,
            "loss_down": self.loss_down,
            "loss_mid": self.loss_mid,
            "total": self.total,
            "n_pos": self.n_pos,
        }


def penalty_coefficients(g, s):
    """Return ``(g_hat, s_hat)``: positives (g == 1) keep s, negatives use 1 - s."""
    g = np.asarray(g, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if np.any((g < 0) | (g > 1)) or np.any((s < 0) | (s > 1)):
        raise ValueError("g and s must lie in [0, 1]")
    pos = g == 1.0
    g_hat = np.where(pos, 0.0, g)
    s_hat = np.where(pos, s, 1.0 - s)
    if g_hat.ndim == 0:
        return float(g_hat), float(s_hat)
    return g_hat, s_hat


def heatmap_loss(score: np.ndarray, heat: np.ndarray, cfg: LossConfig) -> float:
    score = np.asarray(score, dtype=np.float64)
    heat = np.asarray(heat, dtype=np.float64)
    if score.shape != heat.shape:
        raise ValueError(f"shape mismatch {score.shape} vs {heat.shape}")
    n = int(np.count_nonzero(heat == 1.0))
    if n == 0:
        raise UndefinedLossError("no positive keypoints in target heatmap")
    g_hat, s_hat = penalty_coefficients(heat, score)
    s_hat = np.clip(s_hat, EPS, 1.0)
    terms = (1.0 - g_hat) ** cfg.beta * (1.0 - s_hat) ** cfg.gamma * np.log(s_hat)
    return float(-terms.sum() / n) + 0.0  # avoid -0.0


def recover_local_curve(p, logits: LogitMaps, dy: int):
    """Up, same-row and down points implied by the offsets read at the pixel nearest ``p``."""
    x, y = float(p[0]), float(p[1])
    h, w = logits.shape
    c, r = int(np.round(x)), int(np.round(y))
    if not (0 <= c < w and 0 <= r < h):
        raise ValueError(f"point {p} outside {w}x{h} image")
    return (
        (x + float(logits.off_up[r, c]), y - dy),
        (x + float(logits.off_mid[r, c]), y),
        (x + float(logits.off_down[r, c]), y + dy),
    )


def _curve_weights(curves: Sequence[LaneCurve]) -> np.ndarray:
    ordered = sorted(curves, key=lambda c: c.id)
    return np.array([len(keypoint_pixels(c)) for c in ordered], dtype=np.float64)


def _aggregate(err: np.ndarray, owner: np.ndarray, weights: np.ndarray) -> float:
    """Per-curve mean of ``err`` then keypoint-count weighted mean across curves."""
    n = len(weights)
    counts = np.bincount(owner, minlength=n)[:n].astype(np.float64)
    sums = np.bincount(owner, weights=err, minlength=n)[:n]
    has = counts > 0
    if not np.any(has):
        return 0.0
    means = sums[has] / counts[has]
    return float(np.dot(weights[has], means) / weights[has].sum())


def _supervised(gt: GroundTruthMaps):
    rows, cols = np.nonzero(gt.mask)
    return rows, cols, gt.owner[rows, cols]


def offset_loss_updown(logits: LogitMaps, gt: GroundTruthMaps, curves: Sequence[LaneCurve], cfg: LossConfig):
    """Mean horizontal L1 between predicted and true neighbours dy above and below."""
    rows, cols, owner = _supervised(gt)
    if len(rows) == 0:
        warnings.warn("supervision mask is empty", EmptySupervisionWarning, stacklevel=2)
        return 0.0, 0.0
    w = _curve_weights(curves)
    err_up = np.abs(logits.off_up[rows, cols] - gt.off_up[rows, cols])
    err_down = np.abs(logits.off_down[rows, cols] - gt.off_down[rows, cols])
    return _aggregate(err_up, owner, w), _aggregate(err_down, owner, w)


def offset_loss_c2f(logits: LogitMaps, gt: GroundTruthMaps, curves: Sequence[LaneCurve], cfg: LossConfig) -> float:
    """Same-row offset loss sampled at the coarse up/down predictions.

    Each coarse point is rounded to the nearest pixel (clamped to the image)
    and refined by the same-row offset read there; the refined x is compared
    with the true lane x on that row.
    """
    rows, cols, owner = _supervised(gt)
    if len(rows) == 0:
        warnings.warn("supervision mask is empty", EmptySupervisionWarning, stacklevel=2)
        return 0.0
    h, w = logits.shape
    wts = _curve_weights(curves)
    errs = []
    for sign, pred, target in ((-1, logits.off_up, gt.off_up), (1, logits.off_down, gt.off_down)):
        qx = np.clip(np.round(cols + pred[rows, cols]), 0, w - 1).astype(np.int64)
        qy = np.clip(rows + sign * cfg.dy, 0, h - 1)
        refined = qx + logits.off_mid[qy, qx]
        errs.append(np.abs(refined - (cols + target[rows, cols])))
    return _aggregate(0.5 * (errs[0] + errs[1]), owner, wts)


def total_loss(logits: LogitMaps, gt: GroundTruthMaps, curves: Sequence[LaneCurve], cfg: LossConfig | None = None) -> LossReport:
    cfg = cfg or LossConfig()
    heat = heatmap_loss(logits.score, gt.heat, cfg)
    empty = not np.any(gt.mask)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySupervisionWarning)
        up, down = offset_loss_updown(logits, gt, curves, cfg)
        mid = offset_loss_c2f(logits, gt, curves, cfg)
    total = heat + cfg.lam * (up + down + mid)
    return LossReport(heat, up, down, mid, total, int(np.count_nonzero(gt.heat == 1.0)), empty)
