"""Linear-array geometry, plane-wave delays, receive apertures and NSI apodizations."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Linear transducer array with centered element positions."""

    n_elements: int = 128
    pitch: float = 0.1e-3
    center_frequency: float = 15.0e6
    sampling_frequency: float = 62.5e6
    sound_speed: float = 1540.0

    def __post_init__(self):
        if self.n_elements < 2:
            raise ValueError("n_elements must be >= 2")
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        if self.sampling_frequency < 2 * self.center_frequency:
            raise ValueError("sampling_frequency must be >= 2 * center_frequency")
        if self.sound_speed <= 0:
            raise ValueError("sound_speed must be positive")

    @property
    def element_x(self) -> np.ndarray:
        """Lateral positions of all elements in meters."""
        return (np.arange(self.n_elements) - (self.n_elements - 1) / 2) * self.pitch

    @property
    def wavelength(self) -> float:
        return self.sound_speed / self.center_frequency


@dataclass(frozen=True)
class PlaneWaveSet:
    """Ordered steering angles (radians)."""

    angles: tuple

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles)
        object.__setattr__(self, "angles", angles)
        if not angles:
            raise ValueError("at least one steering angle is required")
        if any(abs(a) >= math.pi / 2 for a in angles):
            raise ValueError("steering angles must satisfy |angle| < pi/2")
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise ValueError("steering angles must be strictly increasing")

    @classmethod
    def from_degrees(cls, degrees) -> "PlaneWaveSet":
        return cls(tuple(np.deg2rad(np.asarray(degrees, dtype=float))))

    @classmethod
    def default(cls) -> "PlaneWaveSet":
        """Nine angles from -4 to 4 degrees in 1 degree steps."""
        return cls.from_degrees(np.arange(-4, 5))

    def __len__(self):
        return len(self.angles)

    def __iter__(self):
        return iter(self.angles)


class ApodizationKind(enum.Enum):
    UNIFORM = "uniform"
    ZM = "zm"
    DC1 = "dc1"
    DC2 = "dc2"


@dataclass(frozen=True)
class ApodizationSet:
    """The receive windows of one NSI configuration."""

    dc_offset: float
    aperture_size: int

    def __post_init__(self):
        if self.dc_offset <= 0:
            raise ValueError("dc_offset must be positive")
        if self.aperture_size < 2 or self.aperture_size % 2:
            raise ValueError("aperture_size must be even and >= 2")

    def weights(self, kind: ApodizationKind) -> np.ndarray:
        return apodization_weights(kind, self.aperture_size, self.dc_offset)


@dataclass(frozen=True)
class Pixel:
    x: float
    z: float

    def __post_init__(self):
        if self.z < 0:
            raise ValueError("pixel depth must be >= 0")


def element_position(geometry: ArrayGeometry, index: int) -> float:
    if not 0 <= index < geometry.n_elements:
        raise IndexError(f"element index {index} outside [0, {geometry.n_elements})")
    return (index - (geometry.n_elements - 1) / 2) * geometry.pitch


def plane_wave_tx_delay(angle, pixel: Pixel, sound_speed):
    """Transmit arrival time of a plane wave steered by ``angle`` at ``pixel``.

    The time origin is the instant the wavefront crosses the array center.
    """
    return (pixel.z * math.cos(angle) + pixel.x * math.sin(angle)) / sound_speed


def rx_delay(element_x, pixel: Pixel, sound_speed):
    return math.hypot(pixel.x - element_x, pixel.z) / sound_speed


def _aperture_bounds(x, z, n_elements, pitch, f_number):
    """Vectorized aperture selection; returns (start, count) integer arrays."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    x, z = np.broadcast_arrays(x, z)
    center = x / pitch + (n_elements - 1) / 2
    width = np.maximum(np.rint(z / (f_number * pitch)).astype(np.int64), 2)
    start = np.floor(center - (width - 1) / 2 + 0.5).astype(np.int64)
    stop = start + width
    start = np.clip(start, 0, n_elements)
    stop = np.clip(stop, 0, n_elements)
    count = stop - start

    # odd count: drop the end element farther from the pixel (ties drop the last)
    odd = (count % 2 == 1) & (count > 2)
    first_x = (start - (n_elements - 1) / 2) * pitch
    last_x = (stop - 1 - (n_elements - 1) / 2) * pitch
    drop_first = odd & (np.abs(first_x - x) > np.abs(last_x - x))
    start = np.where(drop_first, start + 1, start)
    count = np.where(odd, count - 1, count)

    # fewer than two usable elements: fall back to the two nearest
    small = count < 2
    if np.any(small):
        nearest = np.clip(np.floor(center[small]).astype(np.int64), 0, n_elements - 2)
        start[small] = nearest
        count[small] = 2
    return start, count


def aperture_for_pixel(pixel: Pixel, geometry: ArrayGeometry, f_number: float) -> range:
    """Contiguous receive aperture (element indices) for one pixel at the given F-number.

    The aperture is centered on ``pixel.x`` with width ``pixel.z / f_number``,
    clipped to the array and trimmed to an even element count.
    """
    if f_number <= 0:
        raise ValueError("f_number must be positive")
    if pixel.z <= 0:
        raise ValueError("pixel depth must be positive for aperture selection")
    start, count = _aperture_bounds(pixel.x, pixel.z, geometry.n_elements, geometry.pitch, f_number)
    start, count = int(start), int(count)
    return range(start, start + count)


def apodization_weights(kind: ApodizationKind, aperture_size: int, dc_offset: float | None = None) -> np.ndarray:
    """Receive weights over an even-sized aperture.

    ZM is -1 over the lower-index half and +1 over the upper half; DC1 adds
    ``dc_offset`` to ZM and DC2 is DC1 reversed.
    """
    kind = ApodizationKind(kind)
    if aperture_size < 2 or aperture_size % 2:
        raise ValueError(f"aperture_size must be even and >= 2, got {aperture_size}")
    if kind is ApodizationKind.UNIFORM:
        return np.ones(aperture_size)
    half = aperture_size // 2
    zm = np.concatenate([-np.ones(half), np.ones(half)])
    if kind is ApodizationKind.ZM:
        return zm
    if dc_offset is None or dc_offset <= 0:
        raise ValueError("DC1/DC2 apodizations need a positive dc_offset")
    dc1 = zm + dc_offset
    if kind is ApodizationKind.DC1:
        return dc1
    return dc1[::-1].copy()
