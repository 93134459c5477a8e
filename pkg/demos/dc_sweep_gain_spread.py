"""How element gain variation limits NSI, and what ESC restores.

The array gets +-30 % random element gains.  Without element sensitivity
correction the zero-mean beam no longer has a clean null, so lowering the
DC offset stops paying off once dc reaches the residual null depth.  With
correction the width keeps falling.

Run:  python demos/dc_sweep_gain_spread.py
"""

from nsipd.array_model import ArrayGeometry, PlaneWaveSet
from nsipd.beamform import PixelGrid
from nsipd.metrics import LineSpec
from nsipd.pd_pipeline import MetricsSpec, PipelineConfig, dc_sweep
from nsipd.rf_sim import (PulseModel, point_target_scene, simulate_dataset, simulate_sensitivity_measurement,
                          uniform_gains)

DEPTH = 10e-3
HALF_WIDTH = 80e-6
DX = 0.25e-6
DCS = [1.0, 0.3, 0.1, 0.03, 0.01, 0.003]

geometry = ArrayGeometry()
gains = uniform_gains(geometry.n_elements, 0.3, 0)
scene = point_target_scene(0.0, DEPTH, element_gains=gains)
dataset = simulate_dataset(scene, geometry, PlaneWaveSet.default(), PulseModel(), 1, 1000.0, 1024)
# the measured profile sees the same gains the acquisition did
sensitivity = simulate_sensitivity_measurement(geometry, gains)

grid = PixelGrid.from_extent(-HALF_WIDTH, HALF_WIDTH, DEPTH, DEPTH, DX, 1e-5)
cfg = PipelineConfig(grid=grid, metrics=MetricsSpec(line=LineSpec.horizontal(DEPTH, -HALF_WIDTH, HALF_WIDTH, DX)))
rows = dc_sweep(cfg, DCS, dataset, sensitivity)
table = {(r.esc, r.dc_offset): r.fwhm for r in rows}


def show(width):
    return "   n/a" if width is None else f"{width * 1e6:6.2f}"


print("   dc    ESC on   ESC off   (NSI FWHM, um)")
for dc in DCS:
    print(f"{dc:6g}  {show(table[(True, dc)])}    {show(table[(False, dc)])}")
