"""Ground-truth targets for keypoint heatmaps and local offset maps."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .geometry import ImageSpec, InvalidConfigError, LaneCurve, densify, sample_xs

# contributions below exp(-TRUNCATE**2 / 2) are dropped
TRUNCATE = 3.0


@dataclass(frozen=True)
class EncoderConfig:
    sigma_h: float = 2.0
    sigma_g: float = 5.0
    dy: int = 10

    def __post_init__(self):
        if self.sigma_h <= 0 or self.sigma_g <= 0:
            raise InvalidConfigError("sigma_h and sigma_g must be positive")
        if self.dy < 1:
            raise InvalidConfigError(f"dy must be >= 1, got {self.dy}")


@dataclass
class GroundTruthMaps:
    """Training targets, all planes of shape (H, W).

    ``owner`` holds the index (into the id-sorted curve list) of the lane that
    supervises each pixel, or -1. ``mask`` marks pixels where all three offset
    targets exist; ``mid_mask`` is the wider set where the same-row target
    exists (the lane covers the pixel's own row), which the coarse-to-fine
    loss reads near lane ends.
    """

    heat: np.ndarray
    off_up: np.ndarray
    off_mid: np.ndarray
    off_down: np.ndarray
    mask: np.ndarray
    owner: np.ndarray
    mid_mask: np.ndarray

    @property
    def shape(self):
        return self.heat.shape


def _sorted_curves(curves: Sequence[LaneCurve]) -> list[LaneCurve]:
    return sorted(curves, key=lambda c: c.id)


def keypoint_pixels(curve: LaneCurve) -> np.ndarray:
    """Integer (x, y) pixels of the densified curve, one per covered row."""
    dense = densify(curve)
    rows = dense.ys[dense.ys == np.round(dense.ys)]
    xs = np.interp(rows, dense.ys, dense.xs)
    return np.column_stack([np.round(xs), rows]).astype(np.int64)


def render_heatmap(curves: Sequence[LaneCurve], spec: ImageSpec, cfg: EncoderConfig) -> np.ndarray:
    """Max-composited unnormalised Gaussians centred on every curve pixel."""
    h, w = spec.shape
    heat = np.zeros((h, w), dtype=np.float64)
    if not curves:
        return heat
    kp = np.concatenate([keypoint_pixels(c) for c in curves])
    inside = (kp[:, 0] >= 0) & (kp[:, 0] < w) & (kp[:, 1] >= 0) & (kp[:, 1] < h)
    kp = np.unique(kp[inside], axis=0)
    if len(kp) == 0:
        return heat
    r = int(np.ceil(TRUNCATE * cfg.sigma_h))
    cutoff = TRUNCATE * TRUNCATE * cfg.sigma_h * cfg.sigma_h
    for oy in range(-r, r + 1):
        for ox in range(-r, r + 1):
            d2 = ox * ox + oy * oy
            if d2 > cutoff:
                continue
            x = kp[:, 0] + ox
            y = kp[:, 1] + oy
            ok = (x >= 0) & (x < w) & (y >= 0) & (y < h)
            np.maximum.at(heat, (y[ok], x[ok]), np.exp(-d2 / (2.0 * cfg.sigma_h ** 2)))
    return heat


class OffsetTargets(NamedTuple):
    off_up: np.ndarray
    off_mid: np.ndarray
    off_down: np.ndarray
    mask: np.ndarray
    owner: np.ndarray
    mid_mask: np.ndarray


def render_offsets(curves: Sequence[LaneCurve], spec: ImageSpec, cfg: EncoderConfig) -> OffsetTargets:
    """Offset targets towards the nearest lane on the same row, dy above and dy below.

    A pixel is supervised
    when its horizontal distance to the nearest lane (ties go to the lowest id)
    is at most ``sigma_g`` and the lane covers rows ``y - dy``, ``y`` and
    ``y + dy``. Outside ``mask`` the up/down targets are 0 and the same-row
    target is kept only on ``mid_mask``.
    """
    h, w = spec.shape
    zeros = lambda: np.zeros((h, w), dtype=np.float64)  # noqa: E731
    off_up, off_mid, off_down = zeros(), zeros(), zeros()
    mask = np.zeros((h, w), dtype=np.uint8)
    owner = np.full((h, w), -1, dtype=np.int32)
    mid_mask = np.zeros((h, w), dtype=np.uint8)
    curves = _sorted_curves(curves)
    if not curves:
        return OffsetTargets(off_up, off_mid, off_down, mask, owner, mid_mask)

    rows = np.arange(h, dtype=np.float64)
    cols = np.arange(w, dtype=np.float64)
    mid = np.stack([sample_xs(c, rows) for c in curves])  # (n, H)
    up = np.stack([sample_xs(c, rows - cfg.dy) for c in curves])
    down = np.stack([sample_xs(c, rows + cfg.dy) for c in curves])

    best = np.full((h, w), np.inf)
    nearest = np.zeros((h, w), dtype=np.int32)
    for k in range(len(curves)):
        d = np.abs(cols[None, :] - mid[k][:, None])
        closer = d < best  # strict: earlier (lower id) curve keeps ties
        best[closer] = d[closer]
        nearest[closer] = k

    ri, ci = np.nonzero(best <= cfg.sigma_g)
    k = nearest[ri, ci]
    off_mid[ri, ci] = mid[k, ri] - ci
    mid_mask[ri, ci] = 1
    t_up = up[k, ri] - ci
    t_down = down[k, ri] - ci
    ok = np.isfinite(t_up) & np.isfinite(t_down)
    ri, ci, k = ri[ok], ci[ok], k[ok]
    off_up[ri, ci] = t_up[ok]
    off_down[ri, ci] = t_down[ok]
    mask[ri, ci] = 1
    owner[ri, ci] = k
    return OffsetTargets(off_up, off_mid, off_down, mask, owner, mid_mask)


def encode(curves: Sequence[LaneCurve], spec: ImageSpec, cfg: EncoderConfig | None = None) -> GroundTruthMaps:
    cfg = cfg or EncoderConfig()
    heat = render_heatmap(curves, spec, cfg)
    return GroundTruthMaps(heat, *render_offsets(curves, spec, cfg))
