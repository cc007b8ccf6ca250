"""Synthetic scenes and logit maps standing in for a trained network.

Random numbers come from numpy's ``PCG64`` bit generator seeded with the
64-bit scene or noise seed, so a seed reproduces on any platform running
numpy >= 1.17. Draw order is fixed and documented in each function.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decoder import _maxima_mask
from .encoder import EncoderConfig, encode
from .geometry import ImageSpec, InvalidConfigError, LaneCurve
from .losses import LogitMaps

FAMILIES = ("straight", "quadratic", "cubic")
MAX_ATTEMPTS = 1000
# lane x is snapped to 1/1024 px so offsets survive float32 tensor files exactly
X_QUANTUM = 1.0 / 1024


class InfeasibleSceneError(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of a random lane scene.

    Lanes are polynomials ``x = x_b + a1*t + a2*t**2 + a3*t**3`` in the
    normalised height ``t = (y_bottom - y) / H``, so coefficient ranges are in
    pixels of horizontal displacement across a full image height. ``top`` and
    ``bottom`` are fractions of the image height bounding each lane's span.
    """

    image: ImageSpec = field(default_factory=lambda: ImageSpec(976, 590))
    n_lanes: int | tuple[int, int] = (1, 5)
    family: str | tuple[str, ...] = FAMILIES
    slope_range: tuple[float, float] = (-500.0, 500.0)
    quad_range: tuple[float, float] = (-250.0, 250.0)
    cubic_range: tuple[float, float] = (-150.0, 150.0)
    top: tuple[float, float] = (0.35, 0.6)
    bottom: tuple[float, float] = (0.85, 1.0)
    max_slope: float = 1.5
    sigma_g: float = 5.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.lane_count_range
        if not 1 <= lo <= hi <= 5:
            raise InvalidConfigError(f"n_lanes must lie in 1..5, got {self.n_lanes}")
        for fam in self.families:
            if fam not in FAMILIES:
                raise InvalidConfigError(f"unknown curvature family {fam!r}")
        if not (0 <= self.top[0] <= self.top[1] < self.bottom[0] <= self.bottom[1] <= 1):
            raise InvalidConfigError("need 0 <= top <= bottom <= 1 span fractions")

    @property
    def lane_count_range(self) -> tuple[int, int]:
        if isinstance(self.n_lanes, int):
            return self.n_lanes, self.n_lanes
        return int(self.n_lanes[0]), int(self.n_lanes[1])

    @property
    def families(self) -> tuple[str, ...]:
        return (self.family,) if isinstance(self.family, str) else tuple(self.family)


@dataclass(frozen=True)
class NoiseSpec:
    score_noise_sd: float = 0.0
    offset_noise_sd: float = 0.0
    dropout_prob: float = 0.0
    offset_channels: tuple[str, ...] = ("up", "mid", "down")
    seed: int = 0

    def __post_init__(self):
        if self.score_noise_sd < 0 or self.offset_noise_sd < 0:
            raise InvalidConfigError("noise standard deviations must be non-negative")
        if not 0 <= self.dropout_prob <= 1:
            raise InvalidConfigError("dropout_prob must be in [0, 1]")
        bad = set(self.offset_channels) - {"up", "mid", "down"}
        if bad:
            raise InvalidConfigError(f"unknown offset channels {sorted(bad)}")


def _draw_lane(rng, spec: SceneSpec, family: str):
    w, h = spec.image.width, spec.image.height
    y_top = rng.uniform(*spec.top) * (h - 1)
    y_bot = rng.uniform(*spec.bottom) * (h - 1)
    x_b = rng.uniform(0.05, 0.95) * (w - 1)
    a1 = rng.uniform(*spec.slope_range)
    a2 = rng.uniform(*spec.quad_range) if family in ("quadratic", "cubic") else 0.0
    a3 = rng.uniform(*spec.cubic_range) if family == "cubic" else 0.0
    return y_top, y_bot, np.array([x_b, a1, a2, a3])


def _lane_xs(coef, y_bot, rows, h):
    t = (y_bot - rows) / h
    xs = coef[0] + t * (coef[1] + t * (coef[2] + t * coef[3]))
    return np.round(xs / X_QUANTUM) * X_QUANTUM


def _feasible(lanes, spec: SceneSpec) -> bool:
    w, h = spec.image.width, spec.image.height
    sampled = []
    for y_top, y_bot, coef in lanes:
        rows = np.arange(np.ceil(y_top), np.floor(y_bot) + 1)
        xs = _lane_xs(coef, y_bot, rows, h)
        if np.any(xs < 0) or np.any(xs > w - 1):
            return False
        if np.any(np.abs(np.diff(xs)) > spec.max_slope):
            return False
        sampled.append((rows, xs))
    min_sep = 2.0 * spec.sigma_g
    for i in range(len(sampled)):
        for j in range(i + 1, len(sampled)):
            ri, xi = sampled[i]
            rj, xj = sampled[j]
            common, ii, jj = np.intersect1d(ri, rj, return_indices=True)
            if len(common) == 0:
                continue
            diff = xi[ii] - xj[jj]
            if np.any(np.abs(diff) < min_sep):
                return False
            if np.any(np.sign(diff) != np.sign(diff[0])):
                return False
    return True


def gen_scene(spec: SceneSpec) -> list[LaneCurve]:
    """Sample non-crossing, well separated polynomial lanes.

    Draw order per attempt: lane count, then per lane family, top, bottom,
    bottom x and coefficients. Whole scenes are rejected and redrawn, up to
    1000 attempts.
    """
    rng = make_rng(spec.seed)
    h = spec.image.height
    lo, hi = spec.lane_count_range
    fams = spec.families
    for _ in range(MAX_ATTEMPTS):
        n = int(rng.integers(lo, hi + 1))
        lanes = [_draw_lane(rng, spec, fams[int(rng.integers(len(fams)))]) for _ in range(n)]
        if not _feasible(lanes, spec):
            continue
        # ids follow left-to-right order at each lane's bottom
        lanes.sort(key=lambda l: _lane_xs(l[2], l[1], np.array([np.floor(l[1])]), h)[0])
        curves = []
        for k, (y_top, y_bot, coef) in enumerate(lanes):
            rows = np.arange(np.ceil(y_top), np.floor(y_bot) + 1)
            xs = _lane_xs(coef, y_bot, rows, h)
            curves.append(LaneCurve(np.column_stack([xs, rows]), id=k))
        return curves
    raise InfeasibleSceneError(f"no feasible scene after {MAX_ATTEMPTS} attempts for seed {spec.seed}")


def render_ideal(curves: Sequence[LaneCurve], spec: ImageSpec, cfg: EncoderConfig | None = None) -> LogitMaps:
    """Logits a perfect network would emit: score equals the target heatmap.

    Offsets equal their targets where defined and 0 elsewhere.
    """
    gt = encode(curves, spec, cfg or EncoderConfig())
    return LogitMaps(gt.heat.copy(), gt.off_up.copy(), gt.off_mid.copy(), gt.off_down.copy())


def perturb(logits: LogitMaps, noise: NoiseSpec, dy: int = 10, sigma_h: float = 2.0,
            theta_h: float = 0.5) -> LogitMaps:
    """Apply dropout, score noise and offset noise, in that order.

    Dropout picks grid-row keypoints (local maxima above ``theta_h`` on rows
    that are multiples of ``dy``) with probability ``dropout_prob`` and zeroes
    the score in a square of radius ``ceil(3 * sigma_h)`` around each.
    """
    out = logits.copy()
    if noise.score_noise_sd == 0 and noise.offset_noise_sd == 0 and noise.dropout_prob == 0:
        return out
    rng = make_rng(noise.seed)
    h, w = out.shape

    grid = np.arange(0, h, dy)
    kr, kc = np.nonzero(_maxima_mask(out.score[grid], theta_h, max(1, int(np.ceil(3 * sigma_h)))))
    drop = rng.random(len(kr)) < noise.dropout_prob
    r = int(np.ceil(3 * sigma_h))
    for y, x in zip(grid[kr[drop]], kc[drop]):
        out.score[max(0, y - r):y + r + 1, max(0, x - r):x + r + 1] = 0.0

    if noise.score_noise_sd > 0:
        out.score = np.clip(out.score + rng.normal(0.0, noise.score_noise_sd, (h, w)), 0.0, 1.0)
    if noise.offset_noise_sd > 0:
        for name in ("up", "mid", "down"):
            if name in noise.offset_channels:
                attr = f"off_{name}"
                setattr(out, attr, getattr(out, attr) + rng.normal(0.0, noise.offset_noise_sd, (h, w)))
    return out
