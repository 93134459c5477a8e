"""Power Doppler processing chain for DAS and NSI beamforming.

Per steering angle: element sensitivity correction, SVD clutter filter,
analytic signal, delay-and-sum with each needed apodization.  Per frame:
coherent compounding over angles, envelope, NSI combination.  Frames are
then accumulated and optionally divided by a depth noise profile built from
the smallest singular component.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .array_model import ApodizationKind, ArrayGeometry, PlaneWaveSet
from .beamform import PixelGrid, analytic_signal, delay_matrices, delay_matrix, nsi_values
from .clutter_filter import (SvdCutConfig, _right_singular_vectors, build_casorati, filter_with_noise_component,
                             svd_filter)
from .metrics import LineSpec, MetricsReport, RegionSpec, cnr_db, extract_profile, fwhm, snr_db
from .rf_sim import RfDataset, SensitivityProfile

VARIANTS = ("das", "nsi")
DEFAULT_DC_SWEEP = (0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0)


@dataclass(frozen=True)
class PdImage:
    values: np.ndarray
    grid: PixelGrid
    n_frames: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ValueError("power Doppler values must be non-negative")
        if self.values.shape != self.grid.shape:
            raise ValueError("values do not match the grid")


@dataclass(frozen=True)
class NoiseProfile:
    values: np.ndarray
    window: int

    def __post_init__(self):
        if np.any(self.values <= 0):
            raise ValueError("noise profile entries must be positive")


@dataclass(frozen=True)
class MetricsSpec:
    """Where to measure: an optional profile line and the three regions."""

    line: LineSpec | None = None
    blood: RegionSpec | None = None
    background: RegionSpec | None = None
    noise: RegionSpec | None = None

    def evaluate(self, image) -> MetricsReport:
        report = MetricsReport(line=self.line, regions={
            r.role: r for r in (self.blood, self.background, self.noise) if r is not None})
        if self.line is not None:
            try:
                report.fwhm = fwhm(*extract_profile(image, self.line))
            except ValueError:
                report.fwhm = None
        if self.blood is not None and self.noise is not None:
            try:
                report.snr_db = snr_db(image, self.blood, self.noise)
                if self.background is not None:
                    report.cnr_db = cnr_db(image, self.blood, self.background, self.noise)
            except ValueError:
                pass
        return report


@dataclass(frozen=True)
class PipelineConfig:
    grid: PixelGrid
    dataset_path: str | None = None
    sensitivity_path: str | None = None
    f_number: float = 1.0
    dc_offset: float = 0.1
    svd_cut: SvdCutConfig = SvdCutConfig()
    esc: bool = False
    noise_eq: bool = False
    noise_eq_window: int = 51
    beamformers: tuple = VARIANTS
    accumulate_power: bool = False
    metrics: MetricsSpec = MetricsSpec()

    def __post_init__(self):
        object.__setattr__(self, "beamformers", tuple(self.beamformers))
        if self.f_number <= 0:
            raise ValueError("f_number must be positive")
        if self.dc_offset <= 0:
            raise ValueError("dc_offset must be positive")
        if self.noise_eq_window < 1 or self.noise_eq_window % 2 == 0:
            raise ValueError("noise_eq_window must be odd and >= 1")
        unknown = set(self.beamformers) - set(VARIANTS)
        if unknown or not self.beamformers:
            raise ValueError(f"beamformers must be a non-empty subset of {VARIANTS}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        d["grid"] = PixelGrid(**d["grid"])
        d["svd_cut"] = SvdCutConfig(**d["svd_cut"])
        m = d.get("metrics") or {}
        d["metrics"] = MetricsSpec(
            line=_line_from(m.get("line")),
            **{k: RegionSpec(**m[k]) if m.get(k) else None for k in ("blood", "background", "noise")},
        )
        d["beamformers"] = tuple(d["beamformers"])
        return cls(**d)


def _line_from(d):
    if not d:
        return None
    return LineSpec(tuple(d["start"]), tuple(d["end"]), d["spacing"])


def apply_esc(frame, profile: SensitivityProfile) -> np.ndarray:
    """Divide each receive channel by its single-path sensitivity.

    ``frame`` is ``[..., channel, sample]``.
    """
    frame = np.asarray(frame, dtype=float)
    s = np.asarray(profile.single_path, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise ValueError("sensitivities must be positive")
    if frame.shape[-2] != s.size:
        raise ValueError(f"{frame.shape[-2]} channels but {s.size} sensitivities")
    return frame / s[:, None]


def accumulate(frames, power: bool = False, provenance: dict | None = None) -> PdImage:
    """Pixelwise sum of envelope frames in the given order."""
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to accumulate")
    grid = frames[0].grid
    total = np.zeros(grid.shape)
    for f in frames:
        if f.grid != grid:
            raise ValueError("frames must share one grid")
        total = total + (f.values**2 if power else f.values)
    return PdImage(total, grid, len(frames), dict(provenance or {}))


def smooth_depth(values, window: int) -> np.ndarray:
    """Centered moving average; the window shrinks symmetrically near the ends."""
    values = np.asarray(values, dtype=float)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    n = values.size
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(n)
    h = np.minimum(half, np.minimum(idx, n - 1 - idx))
    return (csum[idx + h + 1] - csum[idx - h]) / (2 * h + 1)


def profile_from_image(noise_image, window: int) -> NoiseProfile:
    """Laterally averaged, depth-smoothed and floored noise profile."""
    depth = np.asarray(noise_image, dtype=float).mean(axis=1)
    smooth = smooth_depth(depth, window)
    floor = 1e-12 * max(float(smooth.max(initial=0.0)), 1e-300)
    return NoiseProfile(np.maximum(smooth, floor), window)


def _noise_image(factors, geometry, angles, grid, f_number, n_samples):
    """Accumulated envelope of the compounded rank-1 noise components.

    ``factors`` holds one ``(spatial, temporal)`` pair per angle with the
    component equal to ``outer(spatial, temporal)``.  Beamforming is linear,
    so each frame's image is ``temporal[t]`` times the image of ``spatial``.
    """
    per_angle = []
    temporal = []
    for (spatial, tvec), angle in zip(factors, angles):
        op = delay_matrix(geometry, angle, grid, ApodizationKind.UNIFORM, None, f_number, n_samples)
        per_angle.append(op @ analytic_signal(spatial.reshape(geometry.n_elements, n_samples)).reshape(-1))
        temporal.append(tvec)
    frames = np.stack(per_angle, axis=1) @ np.stack(temporal)  # (n_pixels, n_frames)
    return np.abs(frames).sum(axis=1).reshape(grid.shape)


def noise_profile(noise_component_per_angle, geometry: ArrayGeometry, angles: PlaneWaveSet,
                  grid: PixelGrid, window: int = 51, f_number: float = 1.0) -> NoiseProfile:
    """Depth noise profile from the smallest-singular-value components of each angle.

    Each component is beamformed with uniform apodization, compounded,
    enveloped and accumulated like the data, then averaged over scan lines
    and smoothed along depth.
    """
    factors = []
    n_samples = None
    for comp in noise_component_per_angle:
        n_samples = comp.frame_shape[1]
        _, v = _right_singular_vectors(comp.entries)
        factors.append((comp.entries @ v[:, 0], v[:, 0]))
    if len(factors) != len(angles):
        raise ValueError("one noise component per steering angle is required")
    image = _noise_image(factors, geometry, angles, grid, f_number, n_samples)
    return profile_from_image(image, window)


def noise_equalize(image: PdImage, profile: NoiseProfile) -> PdImage:
    """Divide every scan line by the depth noise profile."""
    values = np.asarray(profile.values, dtype=float)
    if values.size != image.grid.nz:
        raise ValueError(f"noise profile has {values.size} depths, image has {image.grid.nz}")
    if np.any(values <= 0):
        raise ValueError("noise profile entries must be positive")
    return PdImage(image.values / values[:, None], image.grid, image.n_frames,
                   {**image.provenance, "noise_eq": True})


def _check_inputs(config: PipelineConfig, dataset: RfDataset, sensitivity):
    if config.esc:
        if sensitivity is None:
            raise ValueError("ESC is enabled but no sensitivity profile was given")
        if len(sensitivity.single_path) != dataset.geometry.n_elements:
            raise ValueError("sensitivity profile length does not match the array")
    dataset.check_finite()
    n_frames = dataset.n_frames
    space = dataset.geometry.n_elements * dataset.n_samples
    needs_svd = config.svd_cut.low_cut > 0 or config.svd_cut.high_cut > 0 or config.noise_eq
    if needs_svd:
        if n_frames < 2:
            raise ValueError("SVD filtering and noise equalization need at least 2 frames")
        if config.svd_cut.low_cut + config.svd_cut.high_cut >= min(space, n_frames):
            raise ValueError(f"SVD cut {config.svd_cut} leaves no components for {n_frames} frames")
    if dataset.n_samples < 8:
        raise ValueError("datasets need at least 8 samples per channel")


def _load_inputs(config, dataset, sensitivity):
    from . import fileio

    if dataset is None:
        if config.dataset_path is None:
            raise ValueError("no dataset given and no dataset_path configured")
        dataset = fileio.read_rf(config.dataset_path)
    if sensitivity is None and config.esc and config.sensitivity_path is not None:
        sensitivity = fileio.read_sensitivity(config.sensitivity_path)
    return dataset, sensitivity


def beamform_stack(dataset: RfDataset, config: PipelineConfig, kinds, sensitivity=None, esc=None,
                   dc_offset=None):
    """Compounded complex frames per apodization kind, plus the noise factors.

    Returns ``({kind: array (n_pixels, n_frames)}, noise_factors or None)``.
    """
    esc = config.esc if esc is None else esc
    dc_offset = config.dc_offset if dc_offset is None else dc_offset
    geometry, grid = dataset.geometry, config.grid
    n_frames, n_samples = dataset.n_frames, dataset.n_samples
    cut = config.svd_cut
    filtering = cut.low_cut > 0 or cut.high_cut > 0

    compounded = {k: np.zeros((grid.size, n_frames), dtype=complex) for k in kinds}
    noise_factors = [] if config.noise_eq else None
    for a, angle in enumerate(dataset.angles):
        rf = np.asarray(dataset.samples[:, a], dtype=float)
        if esc:
            rf = apply_esc(rf, sensitivity)
        if filtering or config.noise_eq:
            casorati = build_casorati(rf)
            if config.noise_eq:
                filtered, factors = filter_with_noise_component(casorati, cut)
                noise_factors.append(factors)
            else:
                filtered = svd_filter(casorati, cut)
            rf = filtered.unbuild()
        data = analytic_signal(rf).reshape(n_frames, -1).T
        del rf
        ops = delay_matrices(geometry, angle, grid, kinds, dc_offset, config.f_number, n_samples)
        for kind in kinds:
            compounded[kind] += ops.pop(kind) @ data
    return compounded, noise_factors


def _pd_values(frames, power):
    return (frames**2 if power else frames).sum(axis=1)


def run_pipeline(config: PipelineConfig, dataset: RfDataset | None = None,
                 sensitivity: SensitivityProfile | None = None) -> dict:
    """Run the configured variants; returns ``{variant: (PdImage, MetricsReport)}``."""
    dataset, sensitivity = _load_inputs(config, dataset, sensitivity)
    _check_inputs(config, dataset, sensitivity)

    kinds = []
    if "das" in config.beamformers:
        kinds.append(ApodizationKind.UNIFORM)
    if "nsi" in config.beamformers:
        kinds += [ApodizationKind.DC1, ApodizationKind.DC2, ApodizationKind.ZM]
    compounded, noise_factors = beamform_stack(dataset, config, kinds, sensitivity)

    profile = None
    if config.noise_eq:
        noise_img = _noise_image(noise_factors, dataset.geometry, dataset.angles, config.grid,
                                 config.f_number, dataset.n_samples)
        profile = profile_from_image(noise_img, config.noise_eq_window)

    base = {"config": config.to_dict(), "n_frames": dataset.n_frames}
    results = {}
    for variant in config.beamformers:
        if variant == "das":
            values = _pd_values(np.abs(compounded[ApodizationKind.UNIFORM]), config.accumulate_power)
        else:
            frames = nsi_values(np.abs(compounded[ApodizationKind.DC1]),
                                np.abs(compounded[ApodizationKind.DC2]),
                                np.abs(compounded[ApodizationKind.ZM]))
            values = _pd_values(frames, config.accumulate_power)
        prov = {**base, "variant": variant, "esc": config.esc,
                "dc_offset": config.dc_offset if variant == "nsi" else None, "noise_eq": False}
        image = PdImage(values.reshape(config.grid.shape), config.grid, dataset.n_frames, prov)
        if profile is not None:
            image = noise_equalize(image, profile)
        results[variant] = (image, config.metrics.evaluate(image))
    return results


@dataclass(frozen=True)
class SweepRow:
    dc_offset: float
    esc: bool
    fwhm: float | None
    snr_db: float | None
    cnr_db: float | None


def dc_sweep(config: PipelineConfig, dc_values=DEFAULT_DC_SWEEP, dataset: RfDataset | None = None,
             sensitivity: SensitivityProfile | None = None, esc_settings=(True, False)) -> list:
    """NSI metrics for each DC offset, with and without ESC, on one dataset.

    DC1 and DC2 images are formed from the uniform and zero-mean beamformed
    frames, ``DC1 = ZM + dc * Uniform`` and ``DC2 = dc * Uniform - ZM``,
    which beamforming linearity makes identical to beamforming each
    apodization separately.
    """
    dc_values = [float(d) for d in dc_values]
    if not dc_values or any(d <= 0 for d in dc_values):
        raise ValueError("DC offsets must be positive")
    loading = dataclasses.replace(config, esc=any(esc_settings))
    dataset, sensitivity = _load_inputs(loading, dataset, sensitivity)
    rows = []
    for esc in esc_settings:
        cfg = dataclasses.replace(config, esc=esc, beamformers=("nsi",))
        _check_inputs(cfg, dataset, sensitivity)
        kinds = [ApodizationKind.UNIFORM, ApodizationKind.ZM]
        compounded, noise_factors = beamform_stack(dataset, cfg, kinds, sensitivity)
        uni, zm = compounded[ApodizationKind.UNIFORM], compounded[ApodizationKind.ZM]
        e_zm = np.abs(zm)
        profile = None
        if cfg.noise_eq:
            noise_img = _noise_image(noise_factors, dataset.geometry, dataset.angles, cfg.grid,
                                     cfg.f_number, dataset.n_samples)
            profile = profile_from_image(noise_img, cfg.noise_eq_window)
        for dc in dc_values:
            frames = nsi_values(np.abs(zm + dc * uni), np.abs(dc * uni - zm), e_zm)
            values = _pd_values(frames, cfg.accumulate_power).reshape(cfg.grid.shape)
            prov = {"config": dataclasses.replace(cfg, dc_offset=dc).to_dict(), "variant": "nsi",
                    "esc": esc, "dc_offset": dc, "n_frames": dataset.n_frames, "noise_eq": False}
            image = PdImage(values, cfg.grid, dataset.n_frames, prov)
            if profile is not None:
                image = noise_equalize(image, profile)
            report = cfg.metrics.evaluate(image)
            rows.append(SweepRow(dc, esc, report.fwhm, report.snr_db, report.cnr_db))
    return rows
