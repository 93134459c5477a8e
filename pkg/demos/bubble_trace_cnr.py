"""Contrast of a power Doppler image of descending microbubbles.

Three vertical traces of bubbles fall through static tissue clutter.  Each
frame is beamformed, the frame stack goes through the SVD clutter filter
and the power over frames is accumulated.  CNR compares the central trace
with tissue beside it, normalized by a bubble-free noise patch.

This uses 60 frames to stay quick (about a minute); pass a larger count as
the first argument to approach the 200-frame acquisition of the test suite.

Run:  python demos/bubble_trace_cnr.py [n_frames]
"""

import sys

import numpy as np

from nsipd.array_model import ArrayGeometry, PlaneWaveSet
from nsipd.beamform import PixelGrid
from nsipd.clutter_filter import CUT_BUBBLE_TRACE, SvdCutConfig
from nsipd.metrics import RegionSpec
from nsipd.pd_pipeline import MetricsSpec, PipelineConfig, run_pipeline
from nsipd.rf_sim import PulseModel, bubble_trace_scene, simulate_dataset

n_frames = int(sys.argv[1]) if len(sys.argv) > 1 else 60

dataset = simulate_dataset(bubble_trace_scene(), ArrayGeometry(), PlaneWaveSet.default(), PulseModel(),
                           n_frames, 1000.0, 640, dtype=np.float32)
grid = PixelGrid.from_extent(-0.6e-3, 0.6e-3, 2.0e-3, 5.0e-3, 10e-6, 25e-6)
metrics = MetricsSpec(
    blood=RegionSpec(-10e-6, 3.0e-3, 20e-6, 1.5e-3, "blood"),
    background=RegionSpec(0.1e-3, 3.0e-3, 0.2e-3, 1.5e-3, "background"),
    noise=RegionSpec(0.3e-3, 2.0e-3, 0.3e-3, 0.3e-3, "noise"),
)
cut = SvdCutConfig.scaled(CUT_BUBBLE_TRACE, n_frames)
cfg = PipelineConfig(grid=grid, dc_offset=0.1, svd_cut=cut, noise_eq=True, metrics=metrics)
results = run_pipeline(cfg, dataset)

print(f"{n_frames} frames, SVD low cut {cut.low_cut}")
for variant in ("das", "nsi"):
    report = results[variant][1]
    cnr = "undefined" if report.cnr_db is None else f"{report.cnr_db:.2f} dB"
    print(f"{variant.upper():>4}: CNR {cnr}, SNR {report.snr_db:.2f} dB")
