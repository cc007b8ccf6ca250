"""
TuSimple and CULane metrics on decoded lanes
============================================

Decode a batch of noisy synthetic frames and score them with both protocols.
"""

from lanekit import (ImageSpec, NoiseSpec, SceneSpec, eval_culane, eval_tusimple, gen_scene, greedy_decode,
                     perturb, render_ideal)
from lanekit.io import lanes_from_decoded
from lanekit.metrics import scaled_width

image = ImageSpec(976, 590)
preds, gts = [], []
for seed in range(10):
    curves = gen_scene(SceneSpec(image=image, seed=seed))
    noisy = perturb(render_ideal(curves, image),
                    NoiseSpec(score_noise_sd=0.05, offset_noise_sd=1.0, dropout_prob=0.02, seed=seed))
    preds.append(lanes_from_decoded(greedy_decode(noisy)))
    gts.append(curves)

tu = eval_tusimple(preds, gts)
print(f"TuSimple  accuracy={tu.accuracy:.4f}  FP={tu.fp_rate:.4f}  FN={tu.fn_rate:.4f}")

cu = eval_culane(preds, gts, image, width=scaled_width(image))
print(f"CULane    tp={cu.tp} fp={cu.fp} fn={cu.fn}  P={cu.precision:.3f} R={cu.recall:.3f} F1={cu.f1:.3f}")
