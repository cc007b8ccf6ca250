"""Bottom-up lane detection toolkit: target encoding, losses, decoding and evaluation."""
from .decoder import DecodedLane, DecoderConfig, efficient_decode, greedy_decode, row_local_maxima, select_start_row
from .encoder import EncoderConfig, GroundTruthMaps, encode, render_heatmap, render_offsets
from .geometry import ImageSpec, InvalidConfigError, InvalidCurveError, LaneCurve, densify, resample_rows, sample_x
from .losses import (LogitMaps, LossConfig, LossReport, heatmap_loss, offset_loss_c2f, offset_loss_updown,
                     penalty_coefficients, recover_local_curve, total_loss)
from .metrics import CulaneReport, TusimpleReport, eval_culane, eval_tusimple, rasterize_lane
from .synth import NoiseSpec, SceneSpec, gen_scene, perturb, render_ideal

__version__ = "0.1.0"
