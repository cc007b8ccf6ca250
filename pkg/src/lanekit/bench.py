"""Wall-time comparison of the two decoders on generated scenes."""
from __future__ import annotations

import dataclasses
import hashlib
import time

import numpy as np

from .decoder import efficient_decode, greedy_decode
from .synth import gen_scene, perturb, render_ideal


def _digest(lanes) -> str:
    h = hashlib.sha256()
    for lane in lanes:
        h.update(np.ascontiguousarray(lane.points, dtype="<f8").tobytes())
        h.update(b"|")
    return h.hexdigest()


def run_bench(cfg) -> dict:
    """Time both decoders over ``cfg.bench.n_scenes`` scenes.

    Scene ``k`` uses seed ``cfg.scene.seed + k``; each decoder runs
    ``cfg.bench.repeats`` times per scene and the fastest run is kept. The
    returned ``digest`` hashes every decoded lane so result determinism can be
    checked separately from timing.
    """
    b = cfg.bench
    times = {"greedy": [], "efficient": []}
    digest = hashlib.sha256()
    lane_counts = {"greedy": [], "efficient": []}
    for k in range(b.n_scenes):
        scene = dataclasses.replace(cfg.scene, seed=cfg.scene.seed + k, n_lanes=b.n_lanes)
        curves = gen_scene(scene)
        logits = render_ideal(curves, scene.image, cfg.encoder)
        noise = dataclasses.replace(cfg.noise, seed=cfg.noise.seed + k)
        logits = perturb(logits, noise, dy=cfg.encoder.dy, sigma_h=cfg.encoder.sigma_h,
                         theta_h=cfg.decoder.theta_h)
        for name, fn in (("greedy", greedy_decode), ("efficient", efficient_decode)):
            best = np.inf
            for _ in range(b.repeats):
                t0 = time.perf_counter()
                lanes = fn(logits, cfg.decoder)
                best = min(best, time.perf_counter() - t0)
            times[name].append(best)
            lane_counts[name].append(len(lanes))
            digest.update(_digest(lanes).encode())
    out = {}
    for name, ts in times.items():
        ts = np.asarray(ts) * 1e3
        out[name] = {"median_ms": float(np.median(ts)), "p95_ms": float(np.percentile(ts, 95)),
                     "lanes": lane_counts[name]}
    out["speedup"] = out["greedy"]["median_ms"] / out["efficient"]["median_ms"]
    out["n_scenes"] = b.n_scenes
    out["digest"] = digest.hexdigest()
    return out
