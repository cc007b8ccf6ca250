"""
Decoder timing
==============

Median and 95th-percentile wall time of both decoders on four-lane scenes.
The same numbers are available from ``lanekit bench``.
"""

from lanekit import ImageSpec, SceneSpec
from lanekit.bench import run_bench
from lanekit.io import BenchConfig, RunConfig

cfg = RunConfig(scene=SceneSpec(image=ImageSpec(976, 590), seed=0),
                bench=BenchConfig(n_scenes=30, repeats=3, n_lanes=4))
res = run_bench(cfg)
for name in ("greedy", "efficient"):
    print(f"{name:10s} median {res[name]['median_ms']:.3f} ms   p95 {res[name]['p95_ms']:.3f} ms")
print(f"efficient speedup: {res['speedup']:.2f}x")
