import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latentflow.fourier import (
    Field,
    PeriodicGrid,
    SpectralField,
    dealias,
    derivative_multiplier,
    dft_reference,
    dominant_modes,
    fft,
    forward_transform,
    inverse_transform,
    irfft,
    rfft,
    spectral_derivative,
)

GRID = PeriodicGrid()
X = GRID.nodes


def spectrum(values):
    return forward_transform(Field(values, GRID))


def test_grid_nodes_and_wavenumbers():
    assert GRID.n_points == 64
    assert X[0] == -np.pi
    assert np.allclose(np.diff(X), 2 * np.pi / 64)
    assert X[-1] < np.pi
    k = GRID.wavenumbers
    assert k[0] == 0 and np.max(np.abs(k)) <= 32
    np.testing.assert_allclose(k, np.arange(33))


@pytest.mark.parametrize("n", [0, 3, 48, 100])
def test_grid_rejects_non_power_of_two(n):
    with pytest.raises(ValueError):
        PeriodicGrid(n)


def test_constant_field_has_only_mean_coefficient():
    c = 1.7
    coeffs = spectrum(np.full(64, c)).coefficients
    # forward transform is unscaled: the mean coefficient is n * c
    assert coeffs[0] == pytest.approx(64 * c, rel=1e-14)
    assert np.max(np.abs(coeffs[1:])) < 1e-12


def test_cosine_has_only_mode_one():
    coeffs = spectrum(np.cos(X)).coefficients
    mask = np.ones(33, bool)
    mask[1] = False
    assert np.max(np.abs(coeffs[mask])) < 1e-12
    assert abs(coeffs[1]) == pytest.approx(32.0, rel=1e-13)


def test_matches_direct_dft_oracle():
    rng = np.random.default_rng(0)
    for n in (2, 4, 8, 64, 256):
        v = rng.standard_normal((3, n))
        np.testing.assert_allclose(rfft(v), dft_reference(v), atol=1e-12 * n)


def test_complex_fft_inverse_pair():
    rng = np.random.default_rng(1)
    z = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    back = fft(fft(z), inverse=True) / 64
    assert np.max(np.abs(back - z)) < 1e-13


def test_roundtrip_1000_random_fields():
    rng = np.random.default_rng(2)
    v = rng.standard_normal((1000, 64)) * rng.uniform(0.1, 10, (1000, 1))
    back = irfft(rfft(v), 64)
    rel = np.max(np.abs(back - v), axis=1) / np.max(np.abs(v), axis=1)
    assert rel.max() < 1e-12


def test_rejects_non_finite():
    v = np.zeros(64)
    v[5] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        forward_transform(Field(v, GRID))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 64, elements=st.floats(-1e3, 1e3)))
def test_parseval(v):
    c = rfft(v)
    w = np.full(33, 2.0)
    w[0] = w[-1] = 1.0
    lhs = np.sum(v**2)
    rhs = np.sum(w * np.abs(c) ** 2) / 64
    assert rhs == pytest.approx(lhs, rel=1e-10, abs=1e-10)


def test_derivative_of_cos_is_minus_sin():
    d = inverse_transform(spectral_derivative(spectrum(np.cos(X)), 1)).values
    assert np.max(np.abs(d + np.sin(X))) < 1e-12


def test_second_derivative_of_cos2x():
    d = inverse_transform(spectral_derivative(spectrum(np.cos(2 * X)), 2)).values
    assert np.max(np.abs(d + 4 * np.cos(2 * X))) < 1e-12


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_derivative_of_constant_is_zero(order):
    d = inverse_transform(spectral_derivative(spectrum(np.full(64, 3.0)), order)).values
    assert np.max(np.abs(d)) < 1e-12


@pytest.mark.parametrize("order", [1, 2, 3, 4])
@pytest.mark.parametrize("k", [1, 5, 20, 31])
def test_derivative_exact_on_resolved_modes(order, k):
    f = np.sin(k * X + 0.3)
    exact = k**order * np.sin(k * X + 0.3 + order * np.pi / 2)
    d = inverse_transform(spectral_derivative(spectrum(f), order)).values
    # round-off in every coefficient is amplified by up to (n/2)**order
    assert np.max(np.abs(d - exact)) <= 1e-12 * 32**order


@pytest.mark.parametrize("order", [0, 5, -1])
def test_derivative_order_checked(order):
    with pytest.raises(ValueError):
        spectral_derivative(spectrum(np.cos(X)), order)


def test_odd_derivative_zeroes_nyquist():
    assert derivative_multiplier(GRID, 1)[-1] == 0
    assert derivative_multiplier(GRID, 3)[-1] == 0
    assert derivative_multiplier(GRID, 2)[-1] == -(32.0**2)


def test_derivative_linearity_and_composition():
    rng = np.random.default_rng(3)
    f, g = spectrum(rng.standard_normal(64)), spectrum(rng.standard_normal(64))
    a, b = 0.7, -2.3
    lhs = spectral_derivative(SpectralField(a * f.coefficients + b * g.coefficients), 1)
    rhs = a * spectral_derivative(f, 1).coefficients + b * spectral_derivative(g, 1).coefficients
    assert np.max(np.abs(lhs.coefficients - rhs)) < 1e-12 * np.max(np.abs(rhs))
    twice = spectral_derivative(spectral_derivative(f, 1), 1).coefficients
    direct = spectral_derivative(f, 2).coefficients
    # they differ only in the Nyquist mode
    assert np.max(np.abs(twice[:-1] - direct[:-1])) < 1e-10 * np.max(np.abs(direct))


def test_dealias():
    low = spectrum(np.cos(X))
    kept = inverse_transform(dealias(low)).values
    assert np.max(np.abs(kept - np.cos(X))) < 1e-14
    high = spectrum(np.cos(30 * X))
    assert np.max(np.abs(inverse_transform(dealias(high)).values)) < 1e-12
    noise = spectrum(np.random.default_rng(4).standard_normal(64))
    kept = dealias(noise).coefficients
    np.testing.assert_array_equal(kept[:22], noise.coefficients[:22])
    assert np.all(kept[22:] == 0)


def test_dominant_modes_energy_order():
    t = np.linspace(0, 5, 40)
    data = np.array([0.3 * np.cos(3 * X) + 1.0 * np.cos(X - s) for s in t])
    modes = dominant_modes(data, 2)
    assert [k for k, _ in modes] == [1, 3]


def test_dominant_modes_travelling_wave_constant_modulus():
    t = np.linspace(0, 5, 40)
    (k, amp), = dominant_modes(np.array([np.cos(X + s) for s in t]), 1)
    assert k == 1
    assert np.ptp(np.abs(amp)) < 1e-12


def test_dominant_modes_ties_prefer_small_k():
    data = np.array([np.cos(2 * X) + np.cos(5 * X)])
    assert [k for k, _ in dominant_modes(data, 2)] == [2, 5]


def test_dominant_modes_count_checked():
    with pytest.raises(ValueError):
        dominant_modes(np.zeros((3, 64)), 33)
    with pytest.raises(ValueError):
        dominant_modes(np.zeros((3, 64)), 0)
