"""
Loss components under controlled noise
======================================

Score ideal logits, then add each kind of noise and watch the matching loss
term grow.
"""

from lanekit import ImageSpec, LossConfig, NoiseSpec, SceneSpec, encode, gen_scene, perturb, render_ideal, total_loss

image = ImageSpec(976, 590)
curves = gen_scene(SceneSpec(image=image, seed=21))
gt = encode(curves, image)
ideal = render_ideal(curves, image)
cfg = LossConfig(beta=4, gamma=2, lam=0.02)

perfect = ideal.copy()
perfect.score = (gt.heat == 1).astype(float)
print("score == 1 on positives only :", total_loss(perfect, gt, curves, cfg).as_dict())
print("score == target heatmap      :", total_loss(ideal, gt, curves, cfg).as_dict())

for label, noise in [
    ("score noise 0.1", NoiseSpec(score_noise_sd=0.1, seed=1)),
    ("keypoint dropout 0.3", NoiseSpec(dropout_prob=0.3, seed=1)),
    ("up/down offsets sd 1", NoiseSpec(offset_noise_sd=1.0, offset_channels=("up", "down"), seed=1)),
    ("same-row offsets sd 1", NoiseSpec(offset_noise_sd=1.0, offset_channels=("mid",), seed=1)),
]:
    rep = total_loss(perturb(ideal, noise), gt, curves, cfg)
    print(f"{label:22s} heat={rep.heat_loss:.4f} up={rep.loss_up:.3f} "
          f"down={rep.loss_down:.3f} mid={rep.loss_mid:.3f} total={rep.total:.4f}")
