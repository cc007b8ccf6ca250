"""Grouping local keypoint predictions into lane instances.

Two decoders are provided. :func:`greedy_decode` grows each lane point by
point from seed keypoints, refining every point with the same-row offset
before proposing its neighbours. :func:`efficient_decode` finds every
keypoint on the row grid at once, links neighbours in vectorised form and
groups the links into chains.

Offsets are always read at the integer pixel nearest to a point and are
applied relative to that pixel.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import InvalidConfigError
from .losses import LogitMaps


@dataclass(frozen=True)
class DecoderConfig:
    theta_h: float = 0.5
    dy: int = 10
    nms_window: int = 4
    max_assoc_dist: float | None = None  # None -> 2 * dy
    min_points: int = 2

    def __post_init__(self):
        if not 0 < self.theta_h < 1:
            raise InvalidConfigError(f"theta_h must be in (0, 1), got {self.theta_h}")
        if self.dy < 1:
            raise InvalidConfigError(f"dy must be >= 1, got {self.dy}")
        if self.nms_window < 1:
            raise InvalidConfigError(f"nms_window must be >= 1, got {self.nms_window}")
        if self.min_points < 2:
            raise InvalidConfigError(f"min_points must be >= 2, got {self.min_points}")
        if self.max_assoc_dist is not None and self.max_assoc_dist < 0:
            raise InvalidConfigError("max_assoc_dist must be non-negative")

    @property
    def assoc_dist(self) -> float:
        return 2.0 * self.dy if self.max_assoc_dist is None else float(self.max_assoc_dist)


@dataclass
class DecodedLane:
    points: np.ndarray  # (N, 2) x, y on grid rows, y ascending
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.points)

    @property
    def xs(self):
        return self.points[:, 0]

    @property
    def ys(self):
        return self.points[:, 1]


def _maxima_mask(rows: np.ndarray, theta: float, window: int) -> np.ndarray:
    """Boolean mask of row-wise local maxima for a (R, W) block.

    A column is kept when it clears ``theta``, is strictly greater than the
    ``window`` values on its left and no smaller than those on its right, so a
    plateau reports its leftmost column.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    r, w = rows.shape
    pad = np.full((r, window), -np.inf)
    padded = np.concatenate([pad, rows, pad], axis=1)
    keep = rows >= theta
    for k in range(1, window + 1):
        left = padded[:, window - k:window - k + w]
        right = padded[:, window + k:window + k + w]
        keep &= (rows > left) & (rows >= right)
    return keep


def row_local_maxima(score: np.ndarray, row: int, cfg: DecoderConfig) -> list[int]:
    """Columns of ``score[row]`` that are thresholded local maxima."""
    score = np.asarray(score)
    line = score[row] if score.ndim == 2 else score
    return np.flatnonzero(_maxima_mask(line, cfg.theta_h, cfg.nms_window)[0]).tolist()


def _grid_maxima(score: np.ndarray, cfg: DecoderConfig):
    grid = np.arange(0, score.shape[0], cfg.dy)
    return grid, _maxima_mask(score[grid], cfg.theta_h, cfg.nms_window)


def _row_order(grid: np.ndarray, counts: np.ndarray) -> np.ndarray:
    # most maxima first, ties toward the bottom of the image
    return np.lexsort((-grid, -counts))


def select_start_row(score: np.ndarray, cfg: DecoderConfig):
    """Grid row with the most local maxima and its maxima columns, or ``None`` for a blank map."""
    grid, peaks = _grid_maxima(score, cfg)
    counts = peaks.sum(axis=1)
    if len(grid) == 0 or counts.max() == 0:
        return None
    best = _row_order(grid, counts)[0]
    return int(grid[best]), np.flatnonzero(peaks[best]).tolist()


def _pixel(x: float, y: float, w: int, h: int):
    c, r = int(np.floor(x + 0.5)), int(np.floor(y + 0.5))
    if 0 <= c < w and 0 <= r < h:
        return c, r
    return None


def _trace(logits: LogitMaps, x0: int, y0: int, cfg: DecoderConfig, refine: bool):
    h, w = logits.shape
    score = logits.score

    def refined(c, r):
        return c + float(logits.off_mid[r, c]) if refine else float(c)

    start_x = refined(x0, y0)
    pts = [(start_x, float(y0), float(score[y0, x0]))]
    for sign, plane in ((-1, logits.off_up), (1, logits.off_down)):
        x, y = start_x, float(y0)
        branch = []
        while True:
            px = _pixel(x, y, w, h)
            if px is None:
                break
            c, r = px
            nx, ny = c + float(plane[r, c]), y + sign * cfg.dy
            nxt = _pixel(nx, ny, w, h)
            if nxt is None or score[nxt[1], nxt[0]] < cfg.theta_h:
                break
            x, y = refined(*nxt) if refine else nx, ny
            branch.append((x, y, float(score[nxt[1], nxt[0]])))
        if sign < 0:
            pts = branch[::-1] + pts
        else:
            pts = pts + branch
    return np.asarray(pts, dtype=np.float64)


def greedy_decode(logits: LogitMaps, cfg: DecoderConfig | None = None, refine: bool = True) -> list[DecodedLane]:
    """Grow lanes from seed keypoints, starting on the row with the most maxima.

    After the start row is used up, unclaimed maxima on the remaining grid
    rows seed further lanes. ``refine=False`` skips the same-row refinement and
    exists for ablation.
    """
    cfg = cfg or DecoderConfig()
    h, w = logits.shape
    grid, peaks = _grid_maxima(logits.score, cfg)
    if len(grid) == 0:
        return []
    counts = peaks.sum(axis=1)
    claimed = np.zeros((h, w), dtype=bool)
    lanes = []
    for ri in _row_order(grid, counts):
        if counts[ri] == 0:
            break
        row = int(grid[ri])
        for col in np.flatnonzero(peaks[ri]):
            if claimed[row, col]:
                continue
            pts = _trace(logits, int(col), row, cfg, refine)
            if len(pts) < cfg.min_points:
                continue
            for x, y, _ in pts:
                px = _pixel(x, y, w, h)
                if px is not None:
                    claimed[px[1], max(0, px[0] - cfg.nms_window):px[0] + cfg.nms_window + 1] = True
            lanes.append(DecodedLane(pts[:, :2].copy(), pts[:, 2].copy()))
    return _drop_covered(lanes, cfg.nms_window)


def _drop_covered(lanes: list[DecodedLane], window: int) -> list[DecodedLane]:
    """Remove lanes with at least half their points within ``window`` px of a longer kept lane."""
    order = sorted(range(len(lanes)), key=lambda i: (-len(lanes[i]), i))
    kept: list[int] = []
    for i in order:
        lane = lanes[i]
        covered = False
        for k in kept:
            other = lanes[k]
            _, a, b = np.intersect1d(lane.ys, other.ys, return_indices=True)
            if 2 * np.count_nonzero(np.abs(lane.xs[a] - other.xs[b]) <= window) >= len(lane):
                covered = True
                break
        if not covered:
            kept.append(i)
    return [lanes[i] for i in sorted(kept)]


def _link(src_rows, src_target, dst_cols_by_row, max_dist):
    """Nearest keypoint in the neighbouring row for every source keypoint.

    ``dst_cols_by_row`` is an (R, K) array of columns padded with NaN. Returns
    the slot index into that row (or -1) and the absolute distance.
    """
    cand = dst_cols_by_row[src_rows]  # (n, K)
    d = np.abs(cand - src_target[:, None])
    d = np.where(np.isnan(d), np.inf, d)
    # argmin picks the first slot on ties; slots are column-sorted
    slot = np.argmin(d, axis=1) if d.shape[1] else np.zeros(len(src_rows), dtype=np.int64)
    dist = d[np.arange(len(src_rows)), slot] if d.shape[1] else np.full(len(src_rows), np.inf)
    slot = np.where(dist <= max_dist, slot, -1)
    return slot, dist


def efficient_decode(logits: LogitMaps, cfg: DecoderConfig | None = None) -> list[DecodedLane]:
    """Decode all grid keypoints in one pass and group them through neighbour links."""
    cfg = cfg or DecoderConfig()
    h, w = logits.shape
    grid, peaks = _grid_maxima(logits.score, cfg)
    if len(grid) == 0 or not peaks.any():
        return []
    n_rows = len(grid)

    # step 1: keypoints, ordered by (row, column)
    kr, kc = np.nonzero(peaks)
    ky = grid[kr]
    n = len(kr)
    counts = peaks.sum(axis=1)
    width = int(counts.max())
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    slot_of = np.arange(n) - start[kr]
    table = np.full((n_rows + 2, width), np.nan)  # rows padded above and below
    table[kr + 1, slot_of] = kc
    index = np.full((n_rows + 2, width), -1, dtype=np.int64)
    index[kr + 1, slot_of] = np.arange(n)

    # step 2: refined position and neighbour proposals
    p_mid = kc + logits.off_mid[ky, kc]
    p_up = kc + logits.off_up[ky, kc]
    p_down = kc + logits.off_down[ky, kc]

    # step 3: associate with the closest keypoint in the adjacent rows
    up_slot, up_dist = _link(kr, p_up, table, cfg.assoc_dist)
    dn_slot, dn_dist = _link(kr + 2, p_down, table, cfg.assoc_dist)
    up_nb = np.where(up_slot >= 0, index[kr, np.maximum(up_slot, 0)], -1)
    dn_nb = np.where(dn_slot >= 0, index[kr + 2, np.maximum(dn_slot, 0)], -1)

    # candidate edges (upper, lower, dist); each node keeps one link per direction
    has_up = up_nb >= 0
    has_dn = dn_nb >= 0
    upper = np.concatenate([up_nb[has_up], np.flatnonzero(has_dn)])
    lower = np.concatenate([np.flatnonzero(has_up), dn_nb[has_dn]])
    dist = np.concatenate([up_dist[has_up], dn_dist[has_dn]])
    order = np.lexsort((lower, upper, dist))
    below = np.full(n, -1, dtype=np.int64)
    above = np.full(n, -1, dtype=np.int64)
    for e in order:
        a, b = upper[e], lower[e]
        if below[a] < 0 and above[b] < 0:
            below[a] = b
            above[b] = a

    # step 4: chains, enumerated from the densest row outward
    seen = np.zeros(n, dtype=bool)
    lanes = []
    row_rank = np.argsort(_row_order(grid, counts))
    seeds = np.lexsort((kc, row_rank[kr]))
    for s in seeds:
        if seen[s]:
            continue
        top = s
        while above[top] >= 0:
            top = above[top]
        chain = []
        node = top
        while node >= 0:
            chain.append(node)
            node = below[node]
        seen[chain] = True
        if len(chain) < cfg.min_points:
            continue
        chain = np.asarray(chain)
        pts = np.column_stack([p_mid[chain], ky[chain].astype(np.float64)])
        lanes.append(DecodedLane(pts, logits.score[ky[chain], kc[chain]].astype(np.float64)))
    return lanes


def decode(logits: LogitMaps, cfg: DecoderConfig | None = None, method: str = "greedy") -> list[DecodedLane]:
    if method == "greedy":
        return greedy_decode(logits, cfg)
    if method == "efficient":
        return efficient_decode(logits, cfg)
    raise ValueError(f"unknown decoder {method!r}")
