"""SVD clutter rejection on per-angle channel data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class CasoratiMatrix:
    """Space x time matrix; column ``t`` is frame ``t`` flattened channel-major."""

    entries: np.ndarray
    frame_shape: tuple

    def __post_init__(self):
        if self.entries.ndim != 2:
            raise ValueError("Casorati entries must be 2-D")
        if int(np.prod(self.frame_shape)) != self.entries.shape[0]:
            raise ValueError("frame_shape does not match the space dimension")

    @property
    def shape(self):
        return self.entries.shape

    def unbuild(self) -> np.ndarray:
        """Back to ``[frame, channel, sample]``."""
        return self.entries.T.reshape((self.entries.shape[1],) + tuple(self.frame_shape))


@dataclass(frozen=True)
class SvdCutConfig:
    low_cut: int = 0
    high_cut: int = 0

    def __post_init__(self):
        if self.low_cut < 0 or self.high_cut < 0:
            raise ValueError("SVD cuts must be >= 0")

    @classmethod
    def scaled(cls, reference_cut: int, n_frames: int, reference_frames: int = 1600, high_cut: int = 0) -> "SvdCutConfig":
        """Keep the removed-subspace fraction of a ``reference_frames`` acquisition."""
        return cls(int(round(reference_cut * n_frames / reference_frames)), high_cut)


# leading singular values removed in the three reference acquisitions (1600 frames)
CUT_BUBBLE_TRACE = 14
CUT_CONTRAST_BRAIN = 140
CUT_CONTRAST_FREE_BRAIN = 110


def build_casorati(rf_one_angle) -> CasoratiMatrix:
    """Stack frames ``[frame, channel, sample]`` as columns of a Casorati matrix."""
    if isinstance(rf_one_angle, np.ndarray):
        frames = rf_one_angle
    else:
        shapes = {np.shape(f) for f in rf_one_angle}
        if len(shapes) != 1:
            raise ValueError(f"inconsistent frame shapes: {sorted(shapes)}")
        frames = np.stack([np.asarray(f) for f in rf_one_angle])
    if frames.ndim != 3:
        raise ValueError("expected [frame, channel, sample] data")
    if frames.shape[0] < 2:
        raise ValueError("the Casorati matrix needs at least 2 frames")
    return CasoratiMatrix(frames.reshape(frames.shape[0], -1).T, frames.shape[1:])


def _right_singular_vectors(x: np.ndarray):
    """Singular values (descending) and right singular vectors of ``x``.

    Uses the time x time Gram matrix when time is the short dimension.
    """
    n_space, n_time = x.shape
    if n_time < n_space:
        gram = x.T @ x
        evals, evecs = np.linalg.eigh(gram)
        order = np.arange(n_time)[::-1]
        sv = np.sqrt(np.clip(evals[order], 0.0, None))
        return sv, evecs[:, order]
    _, sv, vt = np.linalg.svd(x, full_matrices=False)
    return sv, vt.T


def svd_filter(matrix: CasoratiMatrix, cut: SvdCutConfig) -> CasoratiMatrix:
    """Keep singular components ``low_cut .. r-1-high_cut`` (descending order)."""
    x = matrix.entries
    rank_bound = min(x.shape)
    if cut.low_cut + cut.high_cut > rank_bound:
        raise ValueError(f"cut {cut} exceeds the {rank_bound} available singular values")
    if cut.low_cut + cut.high_cut == rank_bound:
        return CasoratiMatrix(np.zeros_like(x), matrix.frame_shape)

    _, v = _right_singular_vectors(x)
    keep = v[:, cut.low_cut:rank_bound - cut.high_cut]
    return CasoratiMatrix((x @ keep) @ keep.T, matrix.frame_shape)


def smallest_sv_component(matrix: CasoratiMatrix) -> CasoratiMatrix:
    """Rank-1 component ``s_min * u_min * v_min^T`` of the last singular value."""
    x = matrix.entries
    if not np.any(x):
        raise ValueError("no components: the matrix is zero")
    _, v = _right_singular_vectors(x)
    v_min = v[:, min(x.shape) - 1]
    # x @ v_min equals s_min * u_min, more accurate than sqrt of a Gram eigenvalue
    return CasoratiMatrix(np.outer(x @ v_min, v_min), matrix.frame_shape)


def filter_with_noise_component(matrix: CasoratiMatrix, cut: SvdCutConfig):
    """``svd_filter`` and the smallest singular component from one decomposition.

    The component is returned factored as ``(spatial, temporal)`` with
    ``outer(spatial, temporal)`` equal to ``smallest_sv_component(matrix)``.
    """
    x = matrix.entries
    rank_bound = min(x.shape)
    if cut.low_cut + cut.high_cut > rank_bound:
        raise ValueError(f"cut {cut} exceeds the {rank_bound} available singular values")
    if not np.any(x):
        raise ValueError("no components: the matrix is zero")
    _, v = _right_singular_vectors(x)
    keep = v[:, cut.low_cut:rank_bound - cut.high_cut]
    v_min = v[:, rank_bound - 1]
    filtered = CasoratiMatrix((x @ keep) @ keep.T, matrix.frame_shape)
    return filtered, (x @ v_min, v_min)
