"""
Greedy and efficient decoding
=============================

Decode ideal and perturbed logits with both decoders and compare lane counts,
point errors and timings.
"""

import time

import numpy as np

from lanekit import (DecoderConfig, ImageSpec, NoiseSpec, SceneSpec, efficient_decode, gen_scene,
                     greedy_decode, perturb, render_ideal)
from lanekit.geometry import sample_xs

image = ImageSpec(976, 590)
curves = gen_scene(SceneSpec(image=image, n_lanes=4, seed=11))
ideal = render_ideal(curves, image)
cfg = DecoderConfig(theta_h=0.5, dy=10)


def mean_error(lanes):
    errs = []
    for lane in lanes:
        gaps = [np.nanmean(np.abs(sample_xs(c, lane.ys) - lane.xs)) for c in curves
                if np.isfinite(sample_xs(c, lane.ys)).any()]
        errs.append(min(gaps))
    return float(np.mean(errs)) if errs else float("nan")


for name, logits in [("ideal", ideal),
                     ("noisy", perturb(ideal, NoiseSpec(score_noise_sd=0.05, offset_noise_sd=0.7, seed=1)))]:
    for decoder in (greedy_decode, efficient_decode):
        t0 = time.perf_counter()
        lanes = decoder(logits, cfg)
        ms = (time.perf_counter() - t0) * 1e3
        print(f"{name:6s} {decoder.__name__:17s} lanes={len(lanes)} (true {len(curves)})"
              f"  mean err={mean_error(lanes):.3f} px  {ms:.2f} ms")

###############################################################################
# Same-row refinement matters once the up/down offsets are noisy.

coarse = perturb(ideal, NoiseSpec(offset_noise_sd=2.0, offset_channels=("up", "down"), seed=4))
print("refined  :", round(mean_error(greedy_decode(coarse, cfg)), 3), "px")
print("unrefined:", round(mean_error(greedy_decode(coarse, cfg, refine=False)), 3), "px")
