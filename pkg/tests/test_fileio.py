import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsipd import fileio
from nsipd.array_model import ArrayGeometry, PlaneWaveSet
from nsipd.beamform import PixelGrid
from nsipd.pd_pipeline import PdImage
from nsipd.rf_sim import RfDataset, SensitivityProfile


def _dataset(shape=(2, 1, 2, 4), seed=0):
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal(shape).astype(np.float32)
    geo = ArrayGeometry(shape[2], 0.2e-3, 7.5e6, 30e6, 1480.0)
    angles = PlaneWaveSet(tuple(np.linspace(-0.05, 0.05, shape[1])) if shape[1] > 1 else (0.01,))
    return RfDataset(samples, geo, angles, 500.0)


def test_rf_round_trip_bit_exact(tmp_path):
    ds = _dataset()
    path = tmp_path / "a.rf"
    fileio.write_rf(path, ds)
    back = fileio.read_rf(path)
    assert back.samples.dtype == np.float32
    assert np.array_equal(back.samples.view(np.uint32), ds.samples.view(np.uint32))
    assert back.geometry == ds.geometry
    assert back.angles == ds.angles
    assert back.frame_rate == ds.frame_rate


def test_rf_header_layout(tmp_path):
    ds = _dataset((3, 2, 2, 5))
    path = tmp_path / "a.rf"
    fileio.write_rf(path, ds)
    raw = path.read_bytes()
    assert raw[:8] == b"NSIRF1\0\0"
    assert struct.unpack("<IIIII", raw[8:28]) == (1, 3, 2, 2, 5)
    assert struct.unpack("<5d", raw[28:68]) == (30e6, 7.5e6, 0.2e-3, 1480.0, 500.0)
    assert struct.unpack("<2d", raw[68:84]) == ds.angles.angles
    assert len(raw) == 84 + 4 * 3 * 2 * 2 * 5
    # frame-major payload order
    assert np.frombuffer(raw[84:], "<f4")[:5].tolist() == ds.samples[0, 0, 0].tolist()


def test_rf_wrong_magic(tmp_path):
    path = tmp_path / "bad.rf"
    path.write_bytes(b"NOTRF\0\0\0" + bytes(100))
    with pytest.raises(fileio.FormatError, match="not an NSIRF file"):
        fileio.read_rf(path)


def test_rf_truncated_payload(tmp_path):
    ds = _dataset((10, 1, 2, 4))
    path = tmp_path / "a.rf"
    fileio.write_rf(path, ds)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4 * 2 * 4])
    with pytest.raises(fileio.FormatError, match="truncated payload"):
        fileio.read_rf(path)


def test_rf_other_errors(tmp_path):
    ds = _dataset()
    path = tmp_path / "a.rf"
    fileio.write_rf(path, ds)
    raw = bytearray(path.read_bytes())

    def expect(data, message):
        path.write_bytes(bytes(data))
        with pytest.raises(fileio.FormatError, match=message):
            fileio.read_rf(path)

    expect(raw[:20], "truncated header")
    expect(raw + b"\0", "trailing bytes")
    v2 = bytearray(raw)
    v2[8:12] = struct.pack("<I", 2)
    expect(v2, "unsupported NSIRF version")
    big = bytearray(raw)
    big[12:28] = struct.pack("<4I", 2**32 - 1, 2**32 - 1, 2, 4)
    expect(big, "dimension overflow")
    zero = bytearray(raw)
    zero[12:16] = struct.pack("<I", 0)
    expect(zero, "invalid dimensions")


@given(samples=arrays(np.float32, st.tuples(st.integers(1, 3), st.integers(1, 2), st.just(2), st.integers(1, 6)),
                      elements=st.floats(width=32, allow_nan=False)))
def test_rf_round_trip_property(tmp_path_factory, samples):
    n_angles = samples.shape[1]
    angles = PlaneWaveSet(tuple(0.01 * np.arange(n_angles)))
    ds = RfDataset(samples, ArrayGeometry(2, 0.1e-3), angles, 1000.0)
    path = tmp_path_factory.mktemp("rf") / "p.rf"
    fileio.write_rf(path, ds)
    assert np.array_equal(fileio.read_rf(path).samples.view(np.uint32), samples.view(np.uint32))


def test_sensitivity_examples(tmp_path):
    path = tmp_path / "s.csv"
    fileio.write_sensitivity(path, SensitivityProfile.from_two_way(np.full(4, 3.0)))
    back = fileio.read_sensitivity(path)
    assert np.all(back.single_path == back.single_path[0])
    fileio.write_sensitivity(path, SensitivityProfile.from_two_way([4.0, 1.0]))
    assert fileio.read_sensitivity(path).single_path.tolist() == [2.0, 1.0]
    assert path.read_text().splitlines()[0] == "element_index,two_way"


@given(values=st.lists(st.floats(1e-300, 1e300), min_size=1, max_size=20))
def test_sensitivity_round_trip_full_precision(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("s") / "s.csv"
    fileio.write_sensitivity(path, SensitivityProfile.from_two_way(values))
    assert fileio.read_sensitivity(path).two_way.tolist() == values


@pytest.mark.parametrize("body", ["element_index,two_way\n0,1.0\n1,0.0\n",
                                  "element_index,two_way\n0,1.0\n1,-2\n",
                                  "element_index,two_way\n1,1.0\n",
                                  "index,value\n0,1\n",
                                  "element_index,two_way\n"])
def test_sensitivity_rejects(tmp_path, body):
    path = tmp_path / "s.csv"
    path.write_text(body)
    with pytest.raises(fileio.FormatError):
        fileio.read_sensitivity(path)


GRID = PixelGrid(-1e-4, 1e-3, 1e-5, 2e-5, 4, 3)


def test_export_image_files(tmp_path):
    v = np.array([[0.0, 1.0, 10.0, 100.0], [0.5, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]])
    img = PdImage(v, GRID, 12, {"variant": "nsi", "config": {"dc_offset": 0.1}})
    paths = fileio.export_image(img, tmp_path / "nsi.pgm", 40.0)
    pgm = fileio.read_pgm(paths["pgm"])
    assert pgm.shape == (3, 4)
    assert pgm[0, 3] == 65535
    assert pgm[0, 0] == 0
    assert pgm[0, 1] == 0  # exactly 40 dB down
    assert pgm[0, 2] == round(0.5 * 65535)
    assert paths["pgm"].read_bytes().startswith(b"P5\n4 3\n65535\n")
    meta = json.loads(paths["meta"].read_text())
    assert meta["n_frames"] == 12 and meta["provenance"]["variant"] == "nsi"
    back = fileio.load_image(paths["raw"])
    assert np.array_equal(back.values, v) and back.grid == GRID
    assert back.provenance == img.provenance


def test_export_zero_image(tmp_path):
    paths = fileio.export_image(PdImage(np.zeros(GRID.shape), GRID, 1), tmp_path / "z", 40.0)
    assert not fileio.read_pgm(paths["pgm"]).any()


@given(v=arrays(float, (3, 4), elements=st.floats(0, 1e300)))
def test_raw_image_round_trip(tmp_path_factory, v):
    paths = fileio.export_image(PdImage(v, GRID, 1), tmp_path_factory.mktemp("img") / "im", 40.0)
    back = fileio.load_image(paths["meta"]).values
    assert np.array_equal(back.view(np.uint64), v.view(np.uint64))


def test_export_unwritable(tmp_path):
    with pytest.raises(OSError):
        fileio.export_image(PdImage(np.ones(GRID.shape), GRID, 1), tmp_path / "missing" / "im", 40.0)


def test_load_image_size_mismatch(tmp_path):
    paths = fileio.export_image(PdImage(np.ones(GRID.shape), GRID, 1), tmp_path / "im", 40.0)
    paths["raw"].write_bytes(b"\0" * 8)
    with pytest.raises(fileio.FormatError):
        fileio.load_image(paths["meta"])


def test_metrics_csv_round_trip(tmp_path):
    rows = [{"variant": "das", "esc": False, "dc_offset": None, "fwhm": 1.2345678901234e-4, "snr_db": 12.5,
             "cnr_db": None},
            {"variant": "nsi", "esc": True, "dc_offset": 0.1, "fwhm": None, "snr_db": -3.25, "cnr_db": 7.0}]
    path = tmp_path / "m.csv"
    fileio.write_metrics_csv(path, rows)
    text = path.read_text().splitlines()
    assert text[0] == "variant,esc,dc_offset,fwhm_um,snr_db,cnr_db"
    assert text[1].startswith("das,off,,123.45678901234")
    back = fileio.read_metrics_csv(path)
    assert back[0]["fwhm"] == pytest.approx(rows[0]["fwhm"], rel=1e-15)
    for a, b in zip(back, rows):
        assert {k: a[k] for k in ("variant", "esc", "dc_offset", "snr_db", "cnr_db")} == \
               {k: b[k] for k in ("variant", "esc", "dc_offset", "snr_db", "cnr_db")}
    (tmp_path / "bad.csv").write_text("a,b\n")
    with pytest.raises(fileio.FormatError):
        fileio.read_metrics_csv(tmp_path / "bad.csv")
