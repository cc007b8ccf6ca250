"""
Encoding lanes into training targets
====================================

Generate a synthetic road scene, render the keypoint heatmap and the three
offset planes, and save a figure of them.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lanekit import EncoderConfig, ImageSpec, SceneSpec, encode, gen_scene

image = ImageSpec(976, 590)
curves = gen_scene(SceneSpec(image=image, n_lanes=4, seed=3))
print(f"{len(curves)} lanes, spans:", [tuple(map(int, c.y_span)) for c in curves])

gt = encode(curves, image, EncoderConfig(sigma_h=2.0, sigma_g=5.0, dy=10))
print("positive pixels:", int((gt.heat == 1).sum()))
print("supervised pixels (all three offsets):", int(gt.mask.sum()))

###############################################################################
# Offsets are only meaningful near a lane, so mask them before plotting.

fig, axes = plt.subplots(2, 2, figsize=(12, 8))
panels = [("heat", gt.heat), ("offset up", gt.off_up), ("offset same row", gt.off_mid),
          ("offset down", gt.off_down)]
for ax, (title, plane) in zip(axes.ravel(), panels):
    shown = plane if title == "heat" else np.ma.masked_where(gt.mask == 0, plane)
    ax.imshow(shown, cmap="magma" if title == "heat" else "coolwarm")
    ax.set_title(title)
    ax.set_axis_off()
fig.tight_layout()
fig.savefig("encode_targets.png", dpi=80)
print("saved encode_targets.png")
