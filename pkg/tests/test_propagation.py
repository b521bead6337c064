import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexcip.propagation import (
    ComplexPlane,
    PlaneSpectrum,
    band_limit,
    crop,
    dz_spectral,
    inverse_dft,
    plane_dft,
    propagate,
    propagate_to_near,
)

# Emitter above both planes, so the field travels toward -z across them like
# the scattered wave does; it sits 7 units above the near plane z = -2.
EMITTER = np.array([0.1, 0.0, 5.0])
WIDE = 40.0


def emitter_plane(k, z, half_width=WIDE, n=401):
    xs = np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    r = np.sqrt((X - EMITTER[0]) ** 2 + (Y - EMITTER[1]) ** 2 + (z - EMITTER[2]) ** 2)
    return ComplexPlane(np.exp(1j * k * r) / (4 * np.pi * r), half_width, z)


def lowpass(p, k, frac=0.8):
    s = plane_dft(p, k)
    keep = s.rho1**2 + s.rho2**2 < (frac * k) ** 2
    return inverse_dft(PlaneSpectrum(np.where(keep, s.coeffs, 0), s.rho1, s.rho2, s.half_width, s.z, k))


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def random_plane(seed, n=32, hw=3.1):
    rng = np.random.default_rng(seed)
    return ComplexPlane(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), hw, -2.0)


@given(st.integers(0, 2**31 - 1))
def test_dft_round_trip(seed):
    p = random_plane(seed)
    assert np.allclose(inverse_dft(plane_dft(p)).values, p.values, atol=1e-12)


def test_constant_plane_is_single_zero_mode():
    s = plane_dft(ComplexPlane(np.full((16, 16), 2.0 + 1j), 1.5))
    nz = np.argwhere(np.abs(s.coeffs) > 1e-12)
    assert nz.tolist() == [[0, 0]]


def test_harmonic_is_single_mode():
    n, hw = 32, 3.1
    p = ComplexPlane(np.zeros((n, n)), hw)
    xs = p.coords()
    h = p.spacing
    rho1 = 2 * np.pi * 3 / (n * h)
    rho2 = -2 * np.pi * 5 / (n * h)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    s = plane_dft(ComplexPlane(np.exp(1j * (rho1 * X + rho2 * Y)), hw))
    nz = np.argwhere(np.abs(s.coeffs) > 1e-9)
    assert len(nz) == 1
    i, j = nz[0]
    assert s.rho1[i, j] == pytest.approx(rho1) and s.rho2[i, j] == pytest.approx(rho2)


def test_zero_far_field_gives_zero_near_field():
    near = propagate_to_near(ComplexPlane(np.zeros((21, 21), dtype=complex), 2.0, -14.0), 8.0, 14.0, 2.0)
    assert np.all(near.values == 0)


def test_far_plane_must_be_below_near_plane():
    with pytest.raises(ValueError):
        propagate_to_near(ComplexPlane(np.zeros((5, 5)), 1.0), 8.0, 2.0, 2.0)


def test_output_spectrum_vanishes_off_the_disk():
    k = 4.0
    out = propagate(random_plane(3), k, 5.0)
    s = plane_dft(out, k)
    assert np.abs(s.coeffs[~s.band()]).max() < 1e-12


@pytest.mark.parametrize("k", [6.72, 8.0, 9.45])
def test_point_source_oracle(k):
    far = emitter_plane(k, -14.0)
    near = propagate_to_near(far, k, 14.0, 2.0)
    ref = emitter_plane(k, -2.0)
    got = crop(lowpass(near, k), 5.0).values
    want = crop(lowpass(ref, k), 5.0).values
    assert rel_err(got, want) < 0.05


@pytest.mark.parametrize("k", [6.72, 9.45])
def test_dz_matches_two_plane_difference(k):
    d = 1e-3
    ref = emitter_plane(k, -2.0)
    fd = (emitter_plane(k, -2.0 + d).values - emitter_plane(k, -2.0 - d).values) / (2 * d)
    got = crop(lowpass(dz_spectral(band_limit(ref, k), k), k), 5.0).values
    want = crop(lowpass(ComplexPlane(fd, WIDE, -2.0), k), 5.0).values
    assert rel_err(got, want) < 0.05


def test_dz_of_zero_is_zero():
    assert np.all(dz_spectral(ComplexPlane(np.zeros((8, 8), dtype=complex), 1.0), 5.0).values == 0)


def test_dz_normal_mode_factor():
    k = 6.0
    p = ComplexPlane(np.full((16, 16), 1.0 + 0j), 2.0)
    out = dz_spectral(p, k).values
    assert np.allclose(out, -1j * k, atol=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_zero_distance_is_identity_on_band(seed):
    k = 5.0
    p = band_limit(random_plane(seed), k)
    assert np.allclose(propagate(p, k, 0.0).values, p.values, atol=1e-10)


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_semigroup(seed, d1, d2):
    k = 5.0
    p = random_plane(seed)
    a = propagate(propagate(p, k, d2), k, d1).values
    b = propagate(p, k, d1 + d2).values
    assert np.allclose(a, b, atol=1e-10)


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 20.0))
def test_band_norm_preserved(seed, d):
    k = 5.0
    p = band_limit(random_plane(seed), k)
    assert np.linalg.norm(propagate(p, k, d).values) == pytest.approx(np.linalg.norm(p.values), rel=1e-12)


def test_crop_keeps_spacing_and_centre():
    p = ComplexPlane(np.arange(81.0).reshape(9, 9), 4.0)
    c = crop(p, 2.0)
    assert c.values.shape == (5, 5) and c.spacing == p.spacing
    assert c.values[2, 2] == p.values[4, 4]

