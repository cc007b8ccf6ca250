"""Lane curve representation and row-wise sampling.

A lane is a single-valued function ``x = f(y)`` stored as a polyline whose
vertices have strictly increasing ``y``. Image coordinates have their origin
at the top-left pixel, ``y`` grows downward.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InvalidCurveError(ValueError):
    pass


class InvalidConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ImageSpec:
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidConfigError(f"image size must be positive, got {self.width}x{self.height}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True, eq=False)
class LaneCurve:
    """Ordered polyline of subpixel points, ``points[:, 0]`` is x and ``points[:, 1]`` is y."""

    points: np.ndarray
    id: int = 0
    score: float | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidCurveError(f"points must have shape (N, 2), got {pts.shape}")
        if len(pts) < 2:
            raise InvalidCurveError(f"lane {self.id} has {len(pts)} point(s), need at least 2")
        if not np.all(np.isfinite(pts)):
            raise InvalidCurveError(f"lane {self.id} has non-finite coordinates")
        if np.any(np.diff(pts[:, 1]) <= 0):
            raise InvalidCurveError(f"lane {self.id}: y must be strictly increasing")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def xs(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def y_span(self) -> tuple[float, float]:
        return float(self.points[0, 1]), float(self.points[-1, 1])

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, LaneCurve):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.id, self.points.tobytes()))

    def shifted(self, dx: float = 0.0, dy: float = 0.0) -> "LaneCurve":
        return LaneCurve(self.points + np.array([dx, dy]), id=self.id, score=self.score)


def curve_from_points(points, id: int = 0) -> LaneCurve:
    """Build a curve from unordered points, sorting them by y."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    order = np.argsort(pts[:, 1], kind="stable")
    return LaneCurve(pts[order], id=id)


def densify(curve: LaneCurve) -> LaneCurve:
    """Insert a vertex on every integer row between the curve's endpoints.

    Original vertices are kept, so the result traces exactly the same polyline
    and ``densify(densify(c)) == densify(c)``.
    """
    y0, y1 = curve.y_span
    rows = np.arange(np.ceil(y0), np.floor(y1) + 1.0)
    ys = np.union1d(rows, curve.ys)
    xs = np.interp(ys, curve.ys, curve.xs)
    return LaneCurve(np.column_stack([xs, ys]), id=curve.id, score=curve.score)


def sample_x(curve: LaneCurve, y: float) -> float | None:
    """Piecewise-linear x of ``curve`` at row ``y``; ``None`` outside the y-span."""
    y0, y1 = curve.y_span
    if not (y0 <= y <= y1):
        return None
    return float(np.interp(y, curve.ys, curve.xs))


def sample_xs(curve: LaneCurve, ys) -> np.ndarray:
    """Vectorised :func:`sample_x`; rows outside the span give NaN."""
    ys = np.asarray(ys, dtype=np.float64)
    out = np.interp(ys, curve.ys, curve.xs)
    y0, y1 = curve.y_span
    out[(ys < y0) | (ys > y1)] = np.nan
    return out


def grid_rows(y0: float, y1: float, dy: int) -> np.ndarray:
    """Rows that are multiples of ``dy`` inside ``[y0, y1]``."""
    first = np.ceil(y0 / dy) * dy
    return np.arange(first, np.floor(y1) + 0.5, dy, dtype=np.float64)


def resample_rows(curve: LaneCurve, dy: int) -> LaneCurve:
    """Sample the curve on the global row grid ``y = k * dy``.

    Raises :class:`InvalidCurveError` when fewer than two grid rows fall
    inside the curve's span.
    """
    if dy < 1:
        raise InvalidConfigError(f"dy must be >= 1, got {dy}")
    rows = grid_rows(*curve.y_span, dy)
    if len(rows) < 2:
        raise InvalidCurveError(f"lane {curve.id} spans fewer than two rows of the dy={dy} grid")
    xs = np.interp(rows, curve.ys, curve.xs)
    return LaneCurve(np.column_stack([xs, rows]), id=curve.id, score=curve.score)
