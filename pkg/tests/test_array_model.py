import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsipd.array_model import (ApodizationKind, ApodizationSet, ArrayGeometry, Pixel, PlaneWaveSet,
                               aperture_for_pixel, apodization_weights, element_position,
                               plane_wave_tx_delay, rx_delay)

GEO = ArrayGeometry()


def test_element_positions_examples():
    assert element_position(GEO, 63) == pytest.approx(-0.05e-3, abs=1e-15)
    assert element_position(GEO, 127) == pytest.approx(6.35e-3, abs=1e-15)
    assert element_position(ArrayGeometry(2, 1e-3), 0) == pytest.approx(-0.5e-3)


def test_element_position_out_of_range():
    with pytest.raises(IndexError):
        element_position(GEO, 128)
    with pytest.raises(IndexError):
        element_position(GEO, -1)


@pytest.mark.parametrize("kwargs", [dict(n_elements=1), dict(pitch=0.0), dict(sound_speed=-1.0),
                                    dict(sampling_frequency=20e6)])
def test_geometry_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        ArrayGeometry(**kwargs)


def test_default_plane_wave_set():
    angles = PlaneWaveSet.default()
    assert len(angles) == 9
    assert np.allclose(np.rad2deg(angles.angles), np.arange(-4, 5))


@pytest.mark.parametrize("angles", [(), (0.1, 0.1), (0.2, 0.1), (math.pi / 2,)])
def test_plane_wave_set_rejects(angles):
    with pytest.raises(ValueError):
        PlaneWaveSet(angles)


def test_tx_delay_examples():
    assert plane_wave_tx_delay(0.0, Pixel(0.0, 15.4e-3), 1540) == pytest.approx(10e-6, rel=1e-12)
    assert plane_wave_tx_delay(0.0, Pixel(5e-3, 0.0), 1540) == 0.0
    # evaluated with 30-digit arithmetic
    assert plane_wave_tx_delay(math.radians(4), Pixel(1e-3, 10e-3), 1540) == pytest.approx(
        6.52298504957296609e-6, rel=1e-12)


def test_rx_delay_examples():
    assert rx_delay(1e-3, Pixel(1e-3, 15.4e-3), 1540) == pytest.approx(10e-6, rel=1e-12)
    assert rx_delay(0.0, Pixel(3e-3, 4e-3), 1000) == pytest.approx(5e-6, rel=1e-12)
    # evaluated with 30-digit arithmetic
    assert rx_delay(-1e-3, Pixel(1e-3, 10e-3), 1540) == pytest.approx(6.62210326440621406e-6, rel=1e-12)


def test_aperture_examples():
    r = aperture_for_pixel(Pixel(0.05e-3, 3.2e-3), GEO, 1.0)
    assert len(r) == 32
    centre = (r.start + r.stop - 1) / 2
    # an even aperture over an element-centred pixel is off by half a pitch at best
    assert abs(element_position(GEO, 0) + centre * GEO.pitch - 0.05e-3) <= GEO.pitch / 2 + 1e-15

    assert len(aperture_for_pixel(Pixel(0.0, 0.15e-3), GEO, 1.0)) == 2

    # width 64 centred on element 0 covers -31..32, clipped to 0..32 (33 elements);
    # the farther end (element 32) is dropped to make the count even
    r = aperture_for_pixel(Pixel(element_position(GEO, 0), 6.4e-3), GEO, 1.0)
    assert r == range(0, 32)


def test_aperture_rejects():
    with pytest.raises(ValueError):
        aperture_for_pixel(Pixel(0.0, 1e-3), GEO, 0.0)
    with pytest.raises(ValueError):
        aperture_for_pixel(Pixel(0.0, 0.0), GEO, 1.0)


def test_apodization_examples():
    assert apodization_weights(ApodizationKind.ZM, 4).tolist() == [-1, -1, 1, 1]
    assert apodization_weights(ApodizationKind.DC1, 4, 0.5).tolist() == [-0.5, -0.5, 1.5, 1.5]
    assert apodization_weights(ApodizationKind.DC2, 4, 0.5).tolist() == [1.5, 1.5, -0.5, -0.5]
    assert apodization_weights(ApodizationKind.UNIFORM, 6).tolist() == [1] * 6
    assert ApodizationSet(0.5, 4).weights(ApodizationKind.DC1).tolist() == [-0.5, -0.5, 1.5, 1.5]


def test_apodization_rejects():
    with pytest.raises(ValueError):
        apodization_weights(ApodizationKind.ZM, 5)
    with pytest.raises(ValueError):
        apodization_weights(ApodizationKind.DC1, 4)
    with pytest.raises(ValueError):
        apodization_weights(ApodizationKind.DC2, 4, -0.1)


@given(half=st.integers(1, 128), k=st.integers(1, 1023))
def test_apodization_identities_exact(half, k):
    # dc = k / 1024 makes every weight and sum exactly representable
    n, dc = 2 * half, k / 1024
    zm = apodization_weights(ApodizationKind.ZM, n)
    dc1 = apodization_weights(ApodizationKind.DC1, n, dc)
    dc2 = apodization_weights(ApodizationKind.DC2, n, dc)
    uni = apodization_weights(ApodizationKind.UNIFORM, n)
    assert zm.sum() == 0
    assert np.array_equal(dc2, dc1[::-1])
    assert np.array_equal(dc1 + dc2, 2 * dc * uni)


@given(half=st.integers(1, 128), dc=st.floats(1e-4, 10))
def test_apodization_identities_any_dc(half, dc):
    n = 2 * half
    dc1 = apodization_weights(ApodizationKind.DC1, n, dc)
    dc2 = apodization_weights(ApodizationKind.DC2, n, dc)
    assert np.array_equal(dc2, dc1[::-1])
    assert np.allclose(dc1 + dc2, 2 * dc, rtol=0, atol=4 * np.finfo(float).eps * (1 + dc))


@given(n=st.integers(2, 512), pitch=st.floats(1e-5, 1e-3))
def test_element_positions_antisymmetric(n, pitch):
    x = ArrayGeometry(n, pitch).element_x
    assert np.array_equal(x, -x[::-1])


@given(angle=st.floats(-math.pi / 4, math.pi / 4), x=st.floats(-20e-3, 20e-3),
       depth_margin=st.floats(0, 30e-3), ex=st.floats(-20e-3, 20e-3))
def test_delays_nonnegative(angle, x, depth_margin, ex):
    # z >= |x| keeps z cos(a) + x sin(a) >= 0 for every |a| <= 45 degrees
    pixel = Pixel(x, abs(x) + depth_margin)
    assert plane_wave_tx_delay(angle, pixel, 1540) >= 0
    assert rx_delay(ex, pixel, 1540) >= 0


@given(n=st.integers(2, 256), x=st.floats(-15e-3, 15e-3), z=st.floats(1e-6, 30e-3),
       f_number=st.floats(0.25, 4))
def test_aperture_even_and_inside(n, x, z, f_number):
    geo = ArrayGeometry(n, 0.1e-3)
    r = aperture_for_pixel(Pixel(x, z), geo, f_number)
    assert len(r) >= 2 and len(r) % 2 == 0
    assert r.start >= 0 and r.stop <= n and r.step == 1


@given(x=st.floats(-5e-3, 5e-3), z=st.floats(0.5e-3, 12e-3))
def test_aperture_near_requested_width(x, z):
    r = aperture_for_pixel(Pixel(x, z), GEO, 1.0)
    width = max(2, round(z / GEO.pitch))
    assert width - 1 <= len(r) <= width + 1 or r.start == 0 or r.stop == GEO.n_elements
