"""Synthetic plane-wave channel data from moving point scatterers.

The model is first order: every scatterer returns a delayed copy of a
Gaussian-modulated pulse to every element, weighted by its reflectivity and
by the receiving element's gain.  Tissue clutter is a dense cloud of strong
scatterers with a small random walk; microbubbles drift at constant
velocity.  Noise is white and Gaussian, seeded per (seed, frame, angle) so
that frames can be produced in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .array_model import ArrayGeometry, PlaneWaveSet

# pulse truncation in units of the Gaussian sigma
PULSE_SUPPORT = 6.0


@dataclass(frozen=True)
class PulseModel:
    center_frequency: float = 15.0e6
    fractional_bandwidth: float = 0.67

    def __post_init__(self):
        if not 0 < self.fractional_bandwidth < 2:
            raise ValueError("fractional_bandwidth must lie in (0, 2)")
        if self.center_frequency <= 0:
            raise ValueError("center_frequency must be positive")

    @property
    def sigma(self) -> float:
        """Envelope standard deviation giving the requested -6 dB bandwidth."""
        return math.sqrt(2 * math.log(2)) / (math.pi * self.fractional_bandwidth * self.center_frequency)


def synth_pulse(t, pulse: PulseModel):
    """Gaussian-modulated cosine, unit peak at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    sigma = pulse.sigma
    return np.exp(-(t**2) / (2 * sigma**2)) * np.cos(2 * np.pi * pulse.center_frequency * t)


@dataclass(frozen=True)
class Scatterer:
    position: tuple
    amplitude: float = 1.0
    velocity: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.position[1] < 0:
            raise ValueError("scatterer depth must be >= 0")


@dataclass(frozen=True, eq=False)
class SceneConfig:
    """Scatterers, clutter and acquisition imperfections of a simulated scene.

    ``field`` is ``(x_min, x_max, z_min, z_max)`` in meters.  It bounds the
    clutter cloud and scatterers leaving it are dropped.  Clutter positions
    are drawn once from ``rng_seed`` unless given explicitly.
    """

    scatterers: tuple = ()
    clutter_amplitude: float = 0.0
    clutter_density: float = 0.0  # scatterers per mm^2
    clutter_velocity_scale: float = 0.0
    noise_std: float = 0.0
    element_gains: np.ndarray | None = None
    rng_seed: int = 0
    field: tuple | None = None
    step: int = 0
    clutter_positions: np.ndarray | None = None
    clutter_reflectivity: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.element_gains is not None:
            gains = np.asarray(self.element_gains, dtype=float)
            if np.any(gains <= 0):
                raise ValueError("element gains must be positive")
            object.__setattr__(self, "element_gains", gains)
        if self.clutter_positions is None:
            positions, reflectivity = self._draw_clutter()
            object.__setattr__(self, "clutter_positions", positions)
            object.__setattr__(self, "clutter_reflectivity", reflectivity)

    def _draw_clutter(self):
        if self.clutter_density <= 0 or self.clutter_amplitude == 0:
            return np.zeros((0, 2)), np.zeros(0)
        if self.field is None:
            raise ValueError("clutter needs a field (x_min, x_max, z_min, z_max)")
        x0, x1, z0, z1 = self.field
        area_mm2 = (x1 - x0) * (z1 - z0) * 1e6
        count = int(round(self.clutter_density * area_mm2))
        rng = np.random.default_rng([self.rng_seed, 0xC1])
        positions = np.column_stack([rng.uniform(x0, x1, count), rng.uniform(z0, z1, count)])
        reflectivity = self.clutter_amplitude * rng.standard_normal(count)
        return positions, reflectivity

    def gains_for(self, geometry: ArrayGeometry) -> np.ndarray:
        if self.element_gains is None:
            return np.ones(geometry.n_elements)
        if self.element_gains.shape != (geometry.n_elements,):
            raise ValueError("element_gains length does not match the array")
        return self.element_gains

    def point_arrays(self):
        """All scatterers (bubbles first, then clutter) as ``(positions, amplitudes)``."""
        if self.scatterers:
            pos = np.array([s.position for s in self.scatterers], dtype=float)
            amp = np.array([s.amplitude for s in self.scatterers], dtype=float)
        else:
            pos, amp = np.zeros((0, 2)), np.zeros(0)
        return (np.concatenate([pos, self.clutter_positions]),
                np.concatenate([amp, self.clutter_reflectivity]))


@dataclass(eq=False)
class RfDataset:
    """Channel data indexed ``[frame, angle, channel, sample]``."""

    samples: np.ndarray
    geometry: ArrayGeometry
    angles: PlaneWaveSet
    frame_rate: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples.ndim != 4:
            raise ValueError("samples must be 4-D [frame, angle, channel, sample]")
        _, n_angles, n_channels, _ = self.samples.shape
        if n_angles != len(self.angles):
            raise ValueError(f"samples carry {n_angles} angles, angle set has {len(self.angles)}")
        if n_channels != self.geometry.n_elements:
            raise ValueError(f"samples carry {n_channels} channels, array has {self.geometry.n_elements}")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")

    @property
    def n_frames(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[3]

    def check_finite(self):
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("dataset contains non-finite samples")


@dataclass(frozen=True)
class SensitivityProfile:
    two_way: np.ndarray
    single_path: np.ndarray

    @classmethod
    def from_two_way(cls, two_way) -> "SensitivityProfile":
        two_way = np.asarray(two_way, dtype=float)
        if np.any(~np.isfinite(two_way)) or np.any(two_way <= 0):
            raise ValueError("two-way sensitivities must be positive and finite")
        return cls(two_way, np.sqrt(two_way))


@numba.njit(cache=True)
def _accumulate_echoes(xs, zs, amps, elem_x, sin_a, cos_a, c, fs, fc, sigma, out):
    n_channels, n_samples = out.shape
    half = PULSE_SUPPORT * sigma
    inv_two_var = 1.0 / (2.0 * sigma * sigma)
    w = 2.0 * math.pi * fc
    for n in range(n_channels):
        for s in range(xs.shape[0]):
            dx = xs[s] - elem_x[n]
            tau = (zs[s] * cos_a + xs[s] * sin_a + math.sqrt(dx * dx + zs[s] * zs[s])) / c
            k0 = max(int(math.ceil((tau - half) * fs)), 0)
            k1 = min(int(math.floor((tau + half) * fs)), n_samples - 1)
            for k in range(k0, k1 + 1):
                t = k / fs - tau
                out[n, k] += amps[s] * math.exp(-t * t * inv_two_var) * math.cos(w * t)


def simulate_frame(scene: SceneConfig, geometry: ArrayGeometry, angle: float, pulse: PulseModel,
                   n_samples: int, frame_index: int = 0, angle_index: int = 0) -> np.ndarray:
    """Channel data ``[channel, sample]`` for one plane-wave transmission."""
    positions, amplitudes = scene.point_arrays()
    out = np.zeros((geometry.n_elements, n_samples))
    if len(amplitudes):
        _accumulate_echoes(
            np.ascontiguousarray(positions[:, 0]), np.ascontiguousarray(positions[:, 1]),
            amplitudes, geometry.element_x, math.sin(angle), math.cos(angle),
            float(geometry.sound_speed), float(geometry.sampling_frequency),
            float(pulse.center_frequency), pulse.sigma, out,
        )
    # gains act on receive only: every element transmits together
    out *= scene.gains_for(geometry)[:, None]
    if scene.noise_std > 0:
        rng = np.random.default_rng([scene.rng_seed, frame_index, angle_index])
        out += scene.noise_std * rng.standard_normal(out.shape)
    return out


def advance_scene(scene: SceneConfig, dt: float) -> SceneConfig:
    """Move bubbles along their velocity and random-walk the clutter by ``dt`` seconds."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    moved = [replace(s, position=(s.position[0] + s.velocity[0] * dt, s.position[1] + s.velocity[1] * dt))
             for s in scene.scatterers
             if _inside(scene.field, s.position[0] + s.velocity[0] * dt, s.position[1] + s.velocity[1] * dt)]

    clutter = scene.clutter_positions
    reflectivity = scene.clutter_reflectivity
    if len(clutter) and scene.clutter_velocity_scale > 0:
        rng = np.random.default_rng([scene.rng_seed, scene.step + 1, 0xD7])
        clutter = clutter + scene.clutter_velocity_scale * dt * rng.standard_normal(clutter.shape)
        keep = _inside_array(scene.field, clutter)
        clutter, reflectivity = clutter[keep], reflectivity[keep]

    return replace(scene, scatterers=tuple(moved), step=scene.step + 1,
                   clutter_positions=clutter, clutter_reflectivity=reflectivity)


def _inside(bounds, x, z):
    if z < 0:
        return False
    if bounds is None:
        return True
    x0, x1, z0, z1 = bounds
    return x0 <= x <= x1 and z0 <= z <= z1


def _inside_array(bounds, positions):
    keep = positions[:, 1] >= 0
    if bounds is not None:
        x0, x1, z0, z1 = bounds
        keep &= (positions[:, 0] >= x0) & (positions[:, 0] <= x1)
        keep &= (positions[:, 1] >= z0) & (positions[:, 1] <= z1)
    return keep


def simulate_sensitivity_measurement(geometry: ArrayGeometry, gains, reflector_constant: float = 1.0) -> SensitivityProfile:
    """Single-element pulse-echo off a parallel planar reflector.

    The same element transmits and receives, so its echo peak scales with
    the square of its gain; the reflector and round-trip geometry contribute
    one constant shared by all elements.
    """
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (geometry.n_elements,):
        raise ValueError("gains length does not match the array")
    if np.any(gains <= 0):
        raise ValueError("gains must be positive")
    return SensitivityProfile.from_two_way(reflector_constant * gains**2)


def simulate_dataset(scene: SceneConfig, geometry: ArrayGeometry, angles: PlaneWaveSet, pulse: PulseModel,
                     n_frames: int, frame_rate: float, n_samples: int, dtype=np.float64) -> RfDataset:
    """Simulate ``n_frames`` frames; all angles of a frame see the same scene state."""
    samples = np.empty((n_frames, len(angles), geometry.n_elements, n_samples), dtype=dtype)
    state = scene
    for f in range(n_frames):
        for a, angle in enumerate(angles):
            samples[f, a] = simulate_frame(state, geometry, angle, pulse, n_samples, f, a)
        if f + 1 < n_frames:
            state = advance_scene(state, 1.0 / frame_rate)
    return RfDataset(samples, geometry, angles, frame_rate)


def uniform_gains(n_elements: int, spread: float = 0.3, seed: int = 0) -> np.ndarray:
    """Element gains drawn uniformly from ``[1 - spread, 1 + spread]``."""
    rng = np.random.default_rng([seed, 0x6A])
    return rng.uniform(1 - spread, 1 + spread, n_elements)


def point_target_scene(x: float = 0.0, z: float = 10e-3, amplitude: float = 1.0, **kwargs) -> SceneConfig:
    return SceneConfig(scatterers=(Scatterer((x, z), amplitude),), **kwargs)


def bubble_trace_scene(trace_x=(-1.0e-3, 0.0, 1.0e-3), z_start: float = 2.5e-3, speed: float = 10e-3,
                       bubbles_per_trace: int = 3, spacing: float = 0.7e-3, clutter_db: float = 30.0,
                       clutter_density: float = 8.0, field=(-3.0e-3, 3.0e-3, 1.0e-3, 6.0e-3),
                       clutter_velocity_scale: float = 0.0, noise_std: float = 0.3, **kwargs) -> SceneConfig:
    """Bubbles descending along vertical lines under a static clutter cloud.

    Each trace holds ``bubbles_per_trace`` bubbles separated by ``spacing``
    in depth, all pushed downward at ``speed``.  Clutter scatterers are
    ``clutter_db`` stronger than a bubble.  The default ``noise_std`` puts a
    bubble about 10 dB above the per-channel noise floor.
    """
    bubbles = tuple(
        Scatterer((x, z_start + i * spacing), 1.0, (0.0, speed))
        for x in trace_x for i in range(bubbles_per_trace)
    )
    return SceneConfig(
        scatterers=bubbles,
        clutter_amplitude=10 ** (clutter_db / 20),
        clutter_density=clutter_density,
        clutter_velocity_scale=clutter_velocity_scale,
        noise_std=noise_std,
        field=field,
        **kwargs,
    )
