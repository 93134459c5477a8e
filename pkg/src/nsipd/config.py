"""Plain-text run configuration for the command-line tools.

A config file holds ``key = value`` lines.  ``#`` starts a comment, blank
lines are ignored, and keys are dotted (``section.name``).  All lengths are
in meters, times in seconds and frequencies in hertz.  Lists are
whitespace- or comma-separated.  Unknown keys are rejected so typos cannot
pass silently; only ``scene.bubble`` may repeat.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .array_model import ArrayGeometry, PlaneWaveSet
from .beamform import PixelGrid
from .clutter_filter import SvdCutConfig
from .metrics import LineSpec, RegionSpec
from .pd_pipeline import VARIANTS, MetricsSpec, PipelineConfig
from .rf_sim import PulseModel, Scatterer, SceneConfig, bubble_trace_scene, uniform_gains


class ConfigError(ValueError):
    """A config file is malformed or names an unknown key."""


def _floats(n=None):
    def parse(text):
        parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
        values = tuple(float(p) for p in parts)
        if n is not None and len(values) != n:
            raise ValueError(f"expected {n} numbers, got {len(values)}")
        if not values:
            raise ValueError("expected at least one number")
        return values
    return parse


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _words(text):
    return tuple(p for p in re.split(r"[,\s]+", text.strip()) if p)


def _str(text):
    return text.strip()


# key -> parser; repeatable keys collect a list
_KEYS = {
    "geometry.n_elements": _int,
    "geometry.pitch": float,
    "geometry.center_frequency": float,
    "geometry.sampling_frequency": float,
    "geometry.sound_speed": float,
    "pulse.fractional_bandwidth": float,
    "acquisition.angles_deg": _floats(),
    "acquisition.n_frames": _int,
    "acquisition.frame_rate": float,
    "acquisition.n_samples": _int,
    "scene.kind": _str,
    "scene.seed": _int,
    "scene.noise_std": float,
    "scene.clutter_db": float,
    "scene.clutter_density": float,
    "scene.clutter_velocity_scale": float,
    "scene.field": _floats(4),
    "scene.trace_x": _floats(),
    "scene.z_start": float,
    "scene.speed": float,
    "scene.bubbles_per_trace": _int,
    "scene.spacing": float,
    "scene.bubble": _floats(),
    "array.gain_spread": float,
    "array.gain_seed": _int,
    "sense.reflector_constant": float,
    "grid.x_min": float,
    "grid.x_max": float,
    "grid.z_min": float,
    "grid.z_max": float,
    "grid.dx": float,
    "grid.dz": float,
    "pipeline.f_number": float,
    "pipeline.dc_offset": float,
    "pipeline.svd_cut_ref": _int,
    "pipeline.svd_cut_ref_frames": _int,
    "pipeline.svd_low_cut": _int,
    "pipeline.svd_high_cut": _int,
    "pipeline.esc": _bool,
    "pipeline.noise_eq": _bool,
    "pipeline.noise_eq_window": _int,
    "pipeline.beamformers": _words,
    "pipeline.accumulate_power": _bool,
    "output.dynamic_range_db": float,
    "metrics.line": _floats(5),
    "metrics.blood": _floats(4),
    "metrics.background": _floats(4),
    "metrics.noise": _floats(4),
}
_REPEATABLE = {"scene.bubble"}
METRIC_KEYS = frozenset(k for k in _KEYS if k.startswith("metrics."))


def parse_config_text(text: str, source: str = "<config>", allowed=None) -> dict:
    """Parse config text into ``{key: value}``; repeatable keys map to lists."""
    allowed = set(_KEYS) if allowed is None else set(allowed)
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS or key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            parsed = _KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key}: {exc}") from None
        if key in _REPEATABLE:
            values.setdefault(key, []).append(parsed)
        elif key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        else:
            values[key] = parsed
    return values


def _region(values, role):
    v = values.get(f"metrics.{role}")
    return None if v is None else RegionSpec(*v, role=role)


def metrics_spec_from(values: dict) -> MetricsSpec:
    line = values.get("metrics.line")
    if line is not None:
        x0, z0, x1, z1, spacing = line
        line = LineSpec((x0, z0), (x1, z1), spacing)
    return MetricsSpec(line, _region(values, "blood"), _region(values, "background"), _region(values, "noise"))


@dataclass(frozen=True)
class CliConfig:
    """Everything a command-line run needs, with defaults for missing keys."""

    geometry: ArrayGeometry = ArrayGeometry()
    pulse: PulseModel = PulseModel()
    angles: PlaneWaveSet = field(default_factory=PlaneWaveSet.default)
    n_frames: int = 200
    frame_rate: float = 1000.0
    n_samples: int = 640
    scene: dict = field(default_factory=dict)
    gain_spread: float = 0.3
    gain_seed: int = 0
    reflector_constant: float = 1.0
    grid: PixelGrid = PixelGrid.from_extent(-1.6e-3, 1.6e-3, 2.0e-3, 6.0e-3, 10e-6, 25e-6)
    pipeline: dict = field(default_factory=dict)
    metrics: MetricsSpec = MetricsSpec()
    dynamic_range_db: float = 40.0
    source: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values: dict) -> "CliConfig":
        g = ArrayGeometry()
        geometry = ArrayGeometry(
            values.get("geometry.n_elements", g.n_elements),
            values.get("geometry.pitch", g.pitch),
            values.get("geometry.center_frequency", g.center_frequency),
            values.get("geometry.sampling_frequency", g.sampling_frequency),
            values.get("geometry.sound_speed", g.sound_speed),
        )
        pulse = PulseModel(geometry.center_frequency,
                           values.get("pulse.fractional_bandwidth", PulseModel().fractional_bandwidth))
        angles = (PlaneWaveSet.from_degrees(values["acquisition.angles_deg"])
                  if "acquisition.angles_deg" in values else PlaneWaveSet.default())
        d = cls()
        grid = d.grid
        if any(k.startswith("grid.") for k in values):
            missing = [k for k in ("x_min", "x_max", "z_min", "z_max", "dx", "dz") if f"grid.{k}" not in values]
            if missing:
                raise ConfigError(f"grid section incomplete, missing {', '.join(missing)}")
            grid = PixelGrid.from_extent(*(values[f"grid.{k}"] for k in ("x_min", "x_max", "z_min", "z_max", "dx", "dz")))
        if "pipeline.svd_cut_ref" in values and "pipeline.svd_low_cut" in values:
            raise ConfigError("set either pipeline.svd_cut_ref or pipeline.svd_low_cut, not both")
        beamformers = values.get("pipeline.beamformers", VARIANTS)
        if set(beamformers) - set(VARIANTS):
            raise ConfigError(f"pipeline.beamformers must be drawn from {VARIANTS}")
        return cls(
            geometry=geometry,
            pulse=pulse,
            angles=angles,
            n_frames=values.get("acquisition.n_frames", d.n_frames),
            frame_rate=values.get("acquisition.frame_rate", d.frame_rate),
            n_samples=values.get("acquisition.n_samples", d.n_samples),
            scene={k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("scene.")},
            gain_spread=values.get("array.gain_spread", d.gain_spread),
            gain_seed=values.get("array.gain_seed", d.gain_seed),
            reflector_constant=values.get("sense.reflector_constant", d.reflector_constant),
            grid=grid,
            pipeline={k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("pipeline.")},
            metrics=metrics_spec_from(values),
            dynamic_range_db=values.get("output.dynamic_range_db", d.dynamic_range_db),
            source=dict(values),
        )

    def element_gains(self) -> np.ndarray:
        if self.gain_spread == 0:
            return np.ones(self.geometry.n_elements)
        if not 0 <= self.gain_spread < 1:
            raise ConfigError("array.gain_spread must lie in [0, 1)")
        return uniform_gains(self.geometry.n_elements, self.gain_spread, self.gain_seed)

    def build_scene(self) -> SceneConfig:
        s = dict(self.scene)
        kind = s.pop("kind", "bubble_trace")
        common = {"rng_seed": s.pop("seed", 0), "element_gains": self.element_gains()}
        if "noise_std" in s:
            common["noise_std"] = s.pop("noise_std")
        bubbles = s.pop("bubble", [])
        if kind == "bubble_trace":
            if bubbles:
                raise ConfigError("scene.bubble lines need scene.kind = custom")
            return bubble_trace_scene(**s, **common)
        if kind != "custom":
            raise ConfigError(f"unknown scene.kind {kind!r} (expected bubble_trace or custom)")
        trace_only = {"trace_x", "z_start", "speed", "bubbles_per_trace", "spacing"} & set(s)
        if trace_only:
            raise ConfigError(f"{', '.join(sorted(trace_only))} only apply to scene.kind = bubble_trace")
        scatterers = []
        for b in bubbles:
            if len(b) not in (2, 3, 5):
                raise ConfigError("scene.bubble takes 'x z [amplitude [vx vz]]'")
            amp = b[2] if len(b) > 2 else 1.0
            vel = (b[3], b[4]) if len(b) == 5 else (0.0, 0.0)
            scatterers.append(Scatterer((b[0], b[1]), amp, vel))
        clutter_db = s.pop("clutter_db", None)
        return SceneConfig(
            scatterers=tuple(scatterers),
            clutter_amplitude=0.0 if clutter_db is None else 10 ** (clutter_db / 20),
            clutter_density=s.pop("clutter_density", 0.0),
            clutter_velocity_scale=s.pop("clutter_velocity_scale", 0.0),
            field=s.pop("field", None),
            **common,
        )

    def svd_cut(self, n_frames: int) -> SvdCutConfig:
        p = self.pipeline
        high = p.get("svd_high_cut", 0)
        if "svd_low_cut" in p:
            return SvdCutConfig(p["svd_low_cut"], high)
        return SvdCutConfig.scaled(p.get("svd_cut_ref", 0), n_frames, p.get("svd_cut_ref_frames", 1600), high)

    def pipeline_config(self, n_frames: int, dataset_path=None, sensitivity_path=None) -> PipelineConfig:
        p = self.pipeline
        base = PipelineConfig(grid=self.grid)
        return dataclasses.replace(
            base,
            dataset_path=None if dataset_path is None else str(dataset_path),
            sensitivity_path=None if sensitivity_path is None else str(sensitivity_path),
            f_number=p.get("f_number", base.f_number),
            dc_offset=p.get("dc_offset", base.dc_offset),
            svd_cut=self.svd_cut(n_frames),
            esc=p.get("esc", base.esc),
            noise_eq=p.get("noise_eq", base.noise_eq),
            noise_eq_window=p.get("noise_eq_window", base.noise_eq_window),
            beamformers=p.get("beamformers", base.beamformers),
            accumulate_power=p.get("accumulate_power", base.accumulate_power),
            metrics=self.metrics,
        )


def load_config(path) -> CliConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return CliConfig.from_values(parse_config_text(text, str(path)))


def load_metric_regions(path) -> MetricsSpec:
    """Read a file holding only ``metrics.*`` keys."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read regions {path}: {exc.strerror}") from None
    return metrics_spec_from(parse_config_text(text, str(path), allowed=METRIC_KEYS))
