"""File formats: LKT1 tensors, JSON lane files, run configs and dataset annotations.

LKT1 layout (little-endian)::

    offset  size  field
    0       4     magic b"LKT1"
    4       1     dtype code (1 = float32)
    5       1     rank (2 or 3)
    6       10    reserved, zero
    16      4*r   dims, uint32 each
    ...           payload, row-major

Rank-3 tensors stack planes in the order score/heat, off_up, off_mid, off_down.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .geometry import ImageSpec, LaneCurve, curve_from_points
from .losses import LossConfig
from .synth import NoiseSpec, SceneSpec

log = logging.getLogger(__name__)

MAGIC = b"LKT1"
DTYPES = {1: np.dtype("<f4")}
HEADER = struct.Struct("<4sBB10x")


class FormatError(ValueError):
    pass


# -- tensors -----------------------------------------------------------------

def write_tensor(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim not in (2, 3):
        raise FormatError(f"rank must be 2 or 3, got {arr.ndim}")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, 1, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, code, rank = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if code not in DTYPES:
        raise FormatError(f"{path}: unsupported dtype code {code}")
    if rank not in (2, 3):
        raise FormatError(f"{path}: unsupported rank {rank}")
    off = HEADER.size
    dims = struct.unpack_from(f"<{rank}I", data, off)
    off += 4 * rank
    dt = DTYPES[code]
    expected = int(np.prod(dims)) * dt.itemsize
    if len(data) - off != expected:
        raise FormatError(f"{path}: payload is {len(data) - off} bytes, expected {expected}")
    return np.frombuffer(data, dtype=dt, offset=off).reshape(dims).copy()


# -- lane files --------------------------------------------------------------

@dataclass
class LaneFile:
    image: ImageSpec
    lanes: list[LaneCurve] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = []
        for lane in self.lanes:
            rec = {"id": int(lane.id), "points": [[float(x), float(y)] for x, y in lane.points]}
            if lane.score is not None:
                rec["score"] = float(lane.score)
            out.append(rec)
        return {"image_size": [self.image.width, self.image.height], "lanes": out}

    @classmethod
    def from_dict(cls, doc: dict) -> "LaneFile":
        try:
            w, h = doc["image_size"]
            lanes = [LaneCurve(np.asarray(rec["points"], dtype=np.float64).reshape(-1, 2),
                               id=int(rec["id"]), score=rec.get("score"))
                     for rec in doc.get("lanes", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed lane file: {exc}") from exc
        return cls(ImageSpec(int(w), int(h)), lanes)


def write_lanes(path, lane_file: LaneFile) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(lane_file.to_dict(), indent=1) + "\n")


def read_lanes(path) -> LaneFile:
    try:
        doc = json.loads(Path(path).read_text())
        return LaneFile.from_dict(doc)
    except (json.JSONDecodeError, FormatError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -- dataset annotations -----------------------------------------------------

def parse_culane_annotation(lines: Iterable[str]) -> list[LaneCurve]:
    """One lane per line of ``x1 y1 x2 y2 ...``; lanes with fewer than two points are skipped."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    curves = []
    for lineno, line in enumerate(lines, 1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) % 2:
            raise FormatError(f"line {lineno}: odd number of coordinates ({len(tokens)})")
        pts = np.asarray(tokens, dtype=np.float64).reshape(-1, 2)
        if len(pts) < 2:
            log.warning("line %d: fewer than two points, skipped", lineno)
            continue
        curves.append(curve_from_points(pts, id=len(curves)))
    return curves


def parse_tusimple_record(record) -> list[LaneCurve]:
    """Lanes of one TuSimple label record; ``-2`` marks rows where a lane is absent."""
    if isinstance(record, str):
        record = json.loads(record)
    rows = np.asarray(record["h_samples"], dtype=np.float64)
    curves = []
    for k, xs in enumerate(record["lanes"]):
        xs = np.asarray(xs, dtype=np.float64)
        if len(xs) != len(rows):
            raise FormatError(f"lane {k}: {len(xs)} values for {len(rows)} h_samples")
        ok = xs != -2
        if ok.sum() < 2:
            continue
        curves.append(curve_from_points(np.column_stack([xs[ok], rows[ok]]), id=len(curves)))
    return curves


# -- run configuration -------------------------------------------------------

@dataclass(frozen=True)
class BenchConfig:
    n_scenes: int = 20
    repeats: int = 3
    n_lanes: int = 4


@dataclass
class RunConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    scene: SceneSpec = field(default_factory=SceneSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    bench: BenchConfig = field(default_factory=BenchConfig)


_SECTIONS = {
    "encoder": EncoderConfig, "loss": LossConfig, "decoder": DecoderConfig,
    "scene": SceneSpec, "noise": NoiseSpec, "bench": BenchConfig,
}
# document key -> dataclass field
_RENAMES = {"loss": {"lambda": "lam"}, "scene": {"image_size": "image"}}


def _build(name, cls, values: dict):
    if not isinstance(values, dict):
        raise FormatError(f"section {name!r} must be a mapping")
    renames = _RENAMES.get(name, {})
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in values.items():
        attr = renames.get(key, key)
        if attr not in known:
            raise FormatError(f"unknown key {name}.{key}")
        if attr == "image":
            val = ImageSpec(*val)
        elif isinstance(val, list):
            val = tuple(val)
        kwargs[attr] = val
    return cls(**kwargs)


def load_config(source) -> RunConfig:
    """Parse a YAML/JSON run config. Unknown sections or keys raise :class:`FormatError`."""
    if isinstance(source, dict):
        doc = source
    else:
        doc = yaml.safe_load(Path(source).read_text()) or {}
    if not isinstance(doc, dict):
        raise FormatError("run config must be a mapping")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise FormatError(f"unknown config section(s): {sorted(unknown)}")
    return RunConfig(**{k: _build(k, _SECTIONS[k], v or {}) for k, v in doc.items()})


def consistent(cfg: RunConfig) -> RunConfig:
    """Check that dy and sigma_g agree across sections."""
    dys = {cfg.encoder.dy, cfg.loss.dy, cfg.decoder.dy}
    if len(dys) != 1:
        raise FormatError(f"dy differs between encoder/loss/decoder sections: {sorted(dys)}")
    if cfg.scene.sigma_g != cfg.encoder.sigma_g:
        raise FormatError("scene.sigma_g must equal encoder.sigma_g")
    return cfg


def lanes_from_decoded(decoded: Sequence, start_id: int = 0) -> list[LaneCurve]:
    return [LaneCurve(np.asarray(d.points), id=start_id + k,
                      score=float(np.mean(d.scores)) if len(d.scores) else None)
            for k, d in enumerate(decoded)]
