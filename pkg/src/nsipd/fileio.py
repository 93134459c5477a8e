"""Binary and text file formats: RF datasets, sensitivity profiles, images, metric tables.

Byte layouts are documented in FORMATS.md at the repository root.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from .array_model import ArrayGeometry, PlaneWaveSet
from .beamform import PixelGrid
from .metrics import log_compress
from .rf_sim import RfDataset, SensitivityProfile

RF_MAGIC = b"NSIRF1\0\0"
RF_VERSION = 1
_RF_HEAD = struct.Struct("<8sIIIII5d")
_MAX_PAYLOAD = 1 << 40

METRICS_COLUMNS = ("variant", "esc", "dc_offset", "fwhm_um", "snr_db", "cnr_db")


class FormatError(ValueError):
    """A file does not follow its declared format."""


def write_rf(path, dataset: RfDataset) -> None:
    """Write a dataset; samples are stored as little-endian float32."""
    n_frames, n_angles, n_channels, n_samples = dataset.samples.shape
    g = dataset.geometry
    head = _RF_HEAD.pack(RF_MAGIC, RF_VERSION, n_frames, n_angles, n_channels, n_samples,
                         g.sampling_frequency, g.center_frequency, g.pitch, g.sound_speed, dataset.frame_rate)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.asarray(dataset.angles.angles, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.samples, dtype="<f4").tobytes())


def read_rf(path) -> RfDataset:
    with open(path, "rb") as fh:
        head = fh.read(_RF_HEAD.size)
        if len(head) < 8 or head[:8] != RF_MAGIC:
            raise FormatError(f"{path}: not an NSIRF file")
        if len(head) < _RF_HEAD.size:
            raise FormatError(f"{path}: truncated header")
        (_, version, n_frames, n_angles, n_channels, n_samples,
         fs, fc, pitch, c, frame_rate) = _RF_HEAD.unpack(head)
        if version != RF_VERSION:
            raise FormatError(f"{path}: unsupported NSIRF version {version}")
        dims = (n_frames, n_angles, n_channels, n_samples)
        if min(dims) == 0:
            raise FormatError(f"{path}: invalid dimensions {dims}")
        payload_bytes = 4 * math.prod(dims)
        if payload_bytes > _MAX_PAYLOAD:
            raise FormatError(f"{path}: dimension overflow {dims}")
        raw_angles = fh.read(8 * n_angles)
        if len(raw_angles) < 8 * n_angles:
            raise FormatError(f"{path}: truncated header")
        angles = np.frombuffer(raw_angles, dtype="<f8")
        payload = fh.read(payload_bytes)
        if len(payload) < payload_bytes:
            raise FormatError(f"{path}: truncated payload")
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after payload")
    samples = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    geometry = ArrayGeometry(n_channels, pitch, fc, fs, c)
    return RfDataset(samples, geometry, PlaneWaveSet(tuple(angles)), frame_rate)


def write_sensitivity(path, profile: SensitivityProfile) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["element_index", "two_way"])
        for i, v in enumerate(profile.two_way):
            w.writerow([i, repr(float(v))])


def read_sensitivity(path) -> SensitivityProfile:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["element_index", "two_way"]:
        raise FormatError(f"{path}: expected header 'element_index,two_way'")
    values = []
    for expected, row in enumerate(rows[1:]):
        if len(row) != 2 or int(row[0]) != expected:
            raise FormatError(f"{path}: element indices must run 0..N-1 in order")
        values.append(float(row[1]))
    if not values:
        raise FormatError(f"{path}: no elements")
    if any(not v > 0 for v in values):
        raise FormatError(f"{path}: two-way sensitivities must be positive")
    return SensitivityProfile.from_two_way(values)


def _pgm_bytes(display: np.ndarray) -> bytes:
    levels = np.rint(np.clip(display, 0.0, 1.0) * 65535).astype(">u2")
    nz, nx = display.shape
    return f"P5\n{nx} {nz}\n65535\n".encode("ascii") + levels.tobytes()


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def export_image(image, path, dynamic_range_db: float = 40.0) -> dict:
    """Write ``<stem>.pgm`` (log-compressed), ``<stem>.f64`` (linear) and ``<stem>.json``.

    ``path`` may carry any suffix; it is replaced.  Returns the written paths.
    """
    stem = Path(path).with_suffix("")
    values = np.asarray(image.values, dtype=float)
    paths = {"pgm": stem.with_suffix(".pgm"), "raw": stem.with_suffix(".f64"), "meta": stem.with_suffix(".json")}
    paths["pgm"].write_bytes(_pgm_bytes(log_compress(values, dynamic_range_db)))
    paths["raw"].write_bytes(np.ascontiguousarray(values, dtype="<f8").tobytes())
    meta = {
        "format": "nsipd-image-1",
        "raw_file": paths["raw"].name,
        "dtype": "<f8",
        "shape": list(values.shape),
        "grid": {k: getattr(image.grid, k) for k in ("x0", "z0", "dx", "dz", "nx", "nz")},
        "n_frames": image.n_frames,
        "dynamic_range_db": dynamic_range_db,
        "provenance": image.provenance,
    }
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
    return paths


def load_image(path):
    """Read an image written by :func:`export_image` (any of its three paths, or the stem)."""
    from .pd_pipeline import PdImage

    meta_path = Path(path).with_suffix(".json")
    meta = json.loads(meta_path.read_text())
    grid = PixelGrid(**meta["grid"])
    raw = (meta_path.parent / meta["raw_file"]).read_bytes()
    expected = 8 * grid.nx * grid.nz
    if len(raw) != expected:
        raise FormatError(f"{meta_path}: raw matrix has {len(raw)} bytes, expected {expected}")
    values = np.frombuffer(raw, dtype="<f8").reshape(grid.shape).astype(float)
    return PdImage(values, grid, meta["n_frames"], meta["provenance"])


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    nx, nz, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[4], dtype=dtype).reshape(nz, nx)


def _fmt(v):
    return "undefined" if v is None else repr(float(v))


def metrics_csv_text(rows) -> str:
    """CSV with the fixed metric columns.

    ``rows`` are dicts with ``variant``, ``esc``, ``dc_offset``, ``snr_db``,
    ``cnr_db`` and either ``fwhm_um`` or ``fwhm`` (meters).
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_COLUMNS)
    for r in rows:
        if "fwhm_um" in r:
            fwhm_um = r["fwhm_um"]
        else:
            fwhm_um = None if r.get("fwhm") is None else r["fwhm"] * 1e6
        w.writerow([
            r["variant"],
            "on" if r["esc"] else "off",
            "" if r.get("dc_offset") is None else repr(float(r["dc_offset"])),
            _fmt(fwhm_um),
            _fmt(r.get("snr_db")),
            _fmt(r.get("cnr_db")),
        ])
    return buf.getvalue()


def write_metrics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(metrics_csv_text(rows))


def read_metrics_csv(path) -> list:
    """Rows as dicts; FWHM is given both as printed (``fwhm_um``) and in meters."""
    def num(s):
        return None if s in ("", "undefined") else float(s)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
            raise FormatError(f"{path}: unexpected metric columns {reader.fieldnames}")
        return [{
            "variant": r["variant"], "esc": r["esc"] == "on", "dc_offset": num(r["dc_offset"]),
            "fwhm_um": num(r["fwhm_um"]),
            "fwhm": None if num(r["fwhm_um"]) is None else num(r["fwhm_um"]) * 1e-6,
            "snr_db": num(r["snr_db"]), "cnr_db": num(r["cnr_db"]),
        } for r in reader]


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
