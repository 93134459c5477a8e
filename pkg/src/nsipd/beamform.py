"""Plane-wave delay-and-sum with selectable receive apodization and NSI envelope combination.

A beamformer for one steering angle and one apodization is a linear map from
the flattened analytic channel data (``channel * n_samples + sample``) to the
pixel grid.  It is stored as a sparse matrix with two entries per
(pixel, element) pair, the interpolation weights of the two samples
bracketing the round-trip delay, scaled by the element's apodization weight.
Beamforming a whole frame stack is then one sparse-dense product.

Interpolation is linear on the baseband signal (the analytic signal
demodulated at the center frequency), and the carrier phase is restored at
the exact delay.  At about four samples per period, interpolating the
modulated signal directly would lose up to a quarter of the echo amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal
import scipy.sparse

from .array_model import ApodizationKind, ArrayGeometry, _aperture_bounds, apodization_weights

# pixels per block when assembling delay matrices; bounds temporary memory
_PIXEL_BLOCK = 8192


@dataclass(frozen=True)
class PixelGrid:
    x0: float
    z0: float
    dx: float
    dz: float
    nx: int
    nz: int

    def __post_init__(self):
        if self.dx <= 0 or self.dz <= 0:
            raise ValueError("grid spacing must be positive")
        if self.nx < 1 or self.nz < 1:
            raise ValueError("grid must have at least one pixel")
        if self.z0 <= 0:
            raise ValueError("all grid depths must be > 0")

    @classmethod
    def from_extent(cls, x_min, x_max, z_min, z_max, dx, dz) -> "PixelGrid":
        nx = int(np.floor((x_max - x_min) / dx + 1e-9)) + 1
        nz = int(np.floor((z_max - z_min) / dz + 1e-9)) + 1
        return cls(x_min, z_min, dx, dz, nx, nz)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def z(self) -> np.ndarray:
        return self.z0 + self.dz * np.arange(self.nz)

    @property
    def shape(self):
        return (self.nz, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.nz


@dataclass(frozen=True, eq=False)
class ComplexImage:
    values: np.ndarray
    grid: PixelGrid


@dataclass(frozen=True, eq=False)
class EnvelopeImage:
    values: np.ndarray
    grid: PixelGrid

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ValueError("envelope values must be non-negative")


def analytic_signal(channel_rf, axis: int = -1) -> np.ndarray:
    """Analytic signal via the FFT Hilbert construction along ``axis``."""
    channel_rf = np.asarray(channel_rf, dtype=float)
    if channel_rf.shape[axis] < 8:
        raise ValueError("analytic_signal needs at least 8 samples")
    return scipy.signal.hilbert(channel_rf, axis=axis)


def delay_matrices(geometry: ArrayGeometry, angle: float, grid: PixelGrid, kinds,
                   dc_offset: float | None, f_number: float, n_samples: int) -> dict:
    """Sparse ``(n_pixels, n_elements * n_samples)`` delay-and-sum operators, one per kind.

    Delays, apertures and interpolation weights are shared; only the
    apodization differs between the returned operators.
    """
    kinds = [ApodizationKind(k) for k in kinds]
    if f_number <= 0:
        raise ValueError("f_number must be positive")
    if n_samples < 2:
        raise ValueError("need at least two samples per channel")
    n_el = geometry.n_elements
    c, fs = geometry.sound_speed, geometry.sampling_frequency
    elem_x = geometry.element_x
    zz, xx = np.meshgrid(grid.z, grid.x, indexing="ij")
    px, pz = xx.ravel(), zz.ravel()
    sin_a, cos_a = np.sin(angle), np.cos(angle)
    omega = 2 * np.pi * geometry.center_frequency / fs  # radians per sample

    rows, cols, interp = [], [], []
    apod = {k: [] for k in kinds}
    for lo in range(0, px.size, _PIXEL_BLOCK):
        bx, bz = px[lo:lo + _PIXEL_BLOCK], pz[lo:lo + _PIXEL_BLOCK]
        start, count = _aperture_bounds(bx, bz, n_el, geometry.pitch, f_number)
        rel = np.arange(n_el)[None, :] - start[:, None]
        r, e = np.nonzero((rel >= 0) & (rel < count[:, None]))
        rel, count = rel[r, e], count[r]

        x, z = bx[r], bz[r]
        tau = (z * cos_a + x * sin_a + np.hypot(x - elem_x[e], z)) / c
        pos = tau * fs
        ok = (pos >= 0) & (pos <= n_samples - 1)
        r, e, rel, count, pos = r[ok], e[ok], rel[ok], count[ok], pos[ok]
        i0 = np.minimum(np.floor(pos).astype(np.int64), n_samples - 2)
        frac = pos - i0
        base = e * n_samples + i0
        # carrier phase between each bracketing sample and the exact delay
        rot0 = np.exp(1j * omega * frac)
        rot1 = rot0 * np.exp(-1j * omega)
        rows += [r + lo, r + lo]
        cols += [base, base + 1]
        interp += [(1.0 - frac) * rot0, frac * rot1]

        for kind in kinds:
            w = np.empty(rel.size)
            for size in np.unique(count):
                sel = count == size
                w[sel] = apodization_weights(kind, int(size), dc_offset)[rel[sel]]
            apod[kind] += [w, w]

    def cat(parts, dtype=float):
        return np.concatenate(parts) if parts else np.zeros(0, dtype=dtype)

    rows, cols, interp = cat(rows, np.int64), cat(cols, np.int64), cat(interp, complex)
    # tag each triplet with its 1-based position; entries never collide (one
    # element/sample column per pair), so the csr data is a permutation of tags
    pattern = scipy.sparse.csr_matrix((np.arange(1, interp.size + 1, dtype=float), (rows, cols)),
                                      shape=(grid.size, n_el * n_samples))
    order = pattern.data.astype(np.int64) - 1
    assert order.size == interp.size
    out = {}
    for kind in kinds:
        values = (interp * cat(apod[kind]))[order]
        out[kind] = scipy.sparse.csr_matrix((values, pattern.indices, pattern.indptr), shape=pattern.shape)
    return out


def delay_matrix(geometry: ArrayGeometry, angle: float, grid: PixelGrid, kind: ApodizationKind,
                 dc_offset: float | None, f_number: float, n_samples: int) -> scipy.sparse.csr_matrix:
    """Sparse ``(n_pixels, n_elements * n_samples)`` delay-and-sum operator for one apodization."""
    kind = ApodizationKind(kind)
    return delay_matrices(geometry, angle, grid, [kind], dc_offset, f_number, n_samples)[kind]


def das_beamform(channels, geometry: ArrayGeometry, angle: float, grid: PixelGrid,
                 kind: ApodizationKind = ApodizationKind.UNIFORM, dc_offset: float | None = None,
                 f_number: float = 1.0) -> ComplexImage:
    """Delay-and-sum one transmission's analytic channel data ``[channel, sample]``."""
    channels = np.asarray(channels)
    if channels.ndim != 2 or channels.shape[0] != geometry.n_elements:
        raise ValueError("channels must be [n_elements, n_samples]")
    op = delay_matrix(geometry, angle, grid, kind, dc_offset, f_number, channels.shape[1])
    return ComplexImage((op @ channels.reshape(-1)).reshape(grid.shape), grid)


def compound(per_angle) -> ComplexImage:
    """Coherent sum of per-angle images, in list order."""
    per_angle = list(per_angle)
    if not per_angle:
        raise ValueError("nothing to compound")
    grid = per_angle[0].grid
    total = np.zeros(grid.shape, dtype=complex)
    for image in per_angle:
        if image.grid != grid:
            raise ValueError("cannot compound images on different grids")
        total = total + image.values
    return ComplexImage(total, grid)


def envelope(image: ComplexImage) -> EnvelopeImage:
    return EnvelopeImage(np.abs(image.values), image.grid)


def nsi_values(e_dc1, e_dc2, e_zm):
    """``(E_DC1 + E_DC2) / 2 - E_ZM`` with negative values clamped to zero."""
    return np.maximum((e_dc1 + e_dc2) / 2 - e_zm, 0.0)


def nsi_combine(e_dc1: EnvelopeImage, e_dc2: EnvelopeImage, e_zm: EnvelopeImage) -> EnvelopeImage:
    if not (e_dc1.grid == e_dc2.grid == e_zm.grid):
        raise ValueError("NSI envelopes must share one grid")
    return EnvelopeImage(nsi_values(e_dc1.values, e_dc2.values, e_zm.values), e_dc1.grid)
