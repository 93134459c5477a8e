"""Image-quality metrics: profiles, FWHM, SNR, CNR and log compression."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .beamform import PixelGrid


@dataclass(frozen=True)
class LineSpec:
    """Straight sampling line from ``start`` to ``end`` ((x, z) in meters)."""

    start: tuple
    end: tuple
    spacing: float

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("line spacing must be positive")

    @classmethod
    def horizontal(cls, z, x_start, x_end, spacing) -> "LineSpec":
        return cls((x_start, z), (x_end, z), spacing)

    @classmethod
    def vertical(cls, x, z_start, z_end, spacing) -> "LineSpec":
        return cls((x, z_start), (x, z_end), spacing)

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    def points(self):
        n = int(math.floor(self.length / self.spacing + 1e-9)) + 1
        s = self.spacing * np.arange(n)
        length = self.length or 1.0
        ux = (self.end[0] - self.start[0]) / length
        uz = (self.end[1] - self.start[1]) / length
        return self.start[0] + s * ux, self.start[1] + s * uz


@dataclass(frozen=True)
class RegionSpec:
    """Axis-aligned rectangle; ``(x, z)`` is the shallow, left corner."""

    x: float
    z: float
    width: float
    height: float
    role: str = "blood"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("region must have a nonzero area")
        if self.role not in ("blood", "background", "noise"):
            raise ValueError(f"unknown region role {self.role!r}")

    def mask(self, grid: PixelGrid) -> np.ndarray:
        tol = 1e-9 * max(grid.dx, grid.dz)
        in_x = (grid.x >= self.x - tol) & (grid.x <= self.x + self.width + tol)
        in_z = (grid.z >= self.z - tol) & (grid.z <= self.z + self.height + tol)
        m = in_z[:, None] & in_x[None, :]
        if not m.any():
            raise ValueError(f"{self.role} region contains no grid pixel")
        return m


@dataclass
class MetricsReport:
    """Metrics of one image; ``None`` marks an undefined value."""

    fwhm: float | None = None
    snr_db: float | None = None
    cnr_db: float | None = None
    line: LineSpec | None = None
    regions: dict = field(default_factory=dict)


def _values(image):
    return np.asarray(getattr(image, "values", image), dtype=float)


def extract_profile(image, line: LineSpec):
    """Bilinear samples of ``image`` along ``line``; returns ``(profile, spacing)``."""
    grid = image.grid
    xs, zs = line.points()
    col = (xs - grid.x0) / grid.dx
    row = (zs - grid.z0) / grid.dz
    eps = 1e-9
    if (col.min() < -eps or col.max() > grid.nx - 1 + eps
            or row.min() < -eps or row.max() > grid.nz - 1 + eps):
        raise ValueError("line leaves the image grid")
    # snap round-off so grid-aligned lines return pixel values exactly
    col = np.where(np.abs(col - np.rint(col)) < eps, np.rint(col), col)
    row = np.where(np.abs(row - np.rint(row)) < eps, np.rint(row), row)
    coords = np.vstack([np.clip(row, 0, grid.nz - 1), np.clip(col, 0, grid.nx - 1)])
    profile = map_coordinates(_values(image), coords, order=1, mode="nearest")
    return profile, line.spacing


def fwhm(profile, spacing: float) -> float:
    """Full width at half maximum around the global peak, linearly interpolated."""
    p = np.asarray(profile, dtype=float)
    peak = int(np.argmax(p))
    half = p[peak] / 2
    if not p[peak] > 0:
        raise ValueError("profile has no positive peak")

    left = peak
    while left > 0 and p[left - 1] > half:
        left -= 1
    right = peak
    while right < p.size - 1 and p[right + 1] > half:
        right += 1
    if left == 0 or right == p.size - 1:
        raise ValueError("unbounded peak: no half-maximum crossing on one side")

    # crossings between (left-1, left) and (right, right+1)
    x_left = left - (p[left] - half) / (p[left] - p[left - 1])
    x_right = right + (p[right] - half) / (p[right] - p[right + 1])
    return (x_right - x_left) * spacing


def _noise_std(values, noise: RegionSpec, grid) -> float:
    sigma = float(np.std(values[noise.mask(grid)]))
    if sigma == 0:
        raise ValueError("noise region has zero variance")
    return sigma


def snr_db(image, blood: RegionSpec, noise: RegionSpec) -> float:
    """``20 log10(mean(blood) / std(noise))`` with the population standard deviation."""
    v = _values(image)
    sigma = _noise_std(v, noise, image.grid)
    return 20 * math.log10(float(np.mean(v[blood.mask(image.grid)])) / sigma)


def cnr_db(image, blood: RegionSpec, background: RegionSpec, noise: RegionSpec) -> float | None:
    """``20 log10((mean(blood) - mean(background)) / std(noise))``.

    Returns ``None`` when the contrast is not positive.
    """
    v = _values(image)
    sigma = _noise_std(v, noise, image.grid)
    contrast = float(np.mean(v[blood.mask(image.grid)])) - float(np.mean(v[background.mask(image.grid)]))
    if contrast <= 0:
        return None
    return 20 * math.log10(contrast / sigma)


def log_compress(image, dynamic_range_db: float) -> np.ndarray:
    """Map to ``[0, 1]`` over ``dynamic_range_db`` below the maximum."""
    if dynamic_range_db <= 0:
        raise ValueError("dynamic range must be positive")
    v = _values(image)
    peak = v.max(initial=0.0)
    out = np.zeros_like(v)
    if peak <= 0:
        return out
    pos = v > 0
    out[pos] = np.clip(1 + 20 * (np.log10(v[pos]) - math.log10(peak)) / dynamic_range_db, 0.0, 1.0)
    return out
