import math

import numpy as np
import pytest

from slepiankit.exceptions import BandlimitMismatchError, InvalidInputError
from slepiankit.functions import random_bandlimited
from slepiankit.harmonic import (
    SampledField,
    SphericalCoefficients,
    forward_sht,
    harmonic_matrix,
    harmonics_at,
    idx,
    inner_product,
    integrate,
    inverse_sht,
    lm,
    make_grid,
    normalized_assoc_legendre,
    spherical_harmonic,
)


@pytest.mark.parametrize(
    ("l", "m", "x", "expected"),
    [
        (0, 0, 0.3, 0.2820947918),
        (1, 0, 1.0, 0.4886025119),
        (2, 2, 0.0, 0.3862742021),
    ],
)
def test_normalized_assoc_legendre(l, m, x, expected):
    assert normalized_assoc_legendre(l, m, x) == pytest.approx(expected, abs=1e-9)


def test_normalized_assoc_legendre_condon_shortley():
    # P̄_1^1(x) = -sqrt(3/(8π)) sqrt(1 - x²)
    assert normalized_assoc_legendre(1, 1, 0.0) == pytest.approx(
        -math.sqrt(3 / (8 * math.pi)), abs=1e-12
    )


def test_normalized_assoc_legendre_high_degree():
    value = normalized_assoc_legendre(2048, 1024, 0.3)
    assert math.isfinite(value)
    assert abs(value) <= math.sqrt((2 * 2048 + 1) / (4 * math.pi))


@pytest.mark.parametrize(("l", "m", "x"), [(1, 2, 0.0), (2, -1, 0.0), (2, 1, 1.5)])
def test_normalized_assoc_legendre_domain(l, m, x):
    with pytest.raises(InvalidInputError):
        normalized_assoc_legendre(l, m, x)


@pytest.mark.parametrize(
    ("l", "m", "theta", "phi", "expected"),
    [
        (0, 0, 1.234, 5.678, 0.2820947918),
        (1, 0, 0.0, 0.0, 0.4886025119),
        (1, 1, math.pi / 2, 0.0, -0.3454941494),
    ],
)
def test_spherical_harmonic(l, m, theta, phi, expected):
    value = spherical_harmonic(l, m, theta, phi)
    assert value.real == pytest.approx(expected, abs=1e-9)
    assert value.imag == pytest.approx(0.0, abs=1e-12)


def test_spherical_harmonic_negative_order_symmetry():
    for l in range(5):
        for m in range(1, l + 1):
            plus = spherical_harmonic(l, m, 0.7, 2.1)
            minus = spherical_harmonic(l, -m, 0.7, 2.1)
            assert minus == pytest.approx((-1) ** m * plus.conjugate(), abs=1e-14)


def test_spherical_harmonic_domain():
    with pytest.raises(InvalidInputError):
        spherical_harmonic(1, 2, 0.0, 0.0)


def test_idx_is_bijection():
    L = 9
    indices = [idx(l, m) for l in range(L) for m in range(-l, l + 1)]
    assert indices == list(range(L * L))
    assert all(lm(idx(l, m)) == (l, m) for l in range(L) for m in range(-l, l + 1))


def test_make_grid_small():
    grid = make_grid(1)
    assert grid.thetas == pytest.approx([math.pi / 2])
    assert grid.theta_weights == pytest.approx([2.0])
    assert grid.phis == pytest.approx([0.0])

    grid = make_grid(2)
    assert np.cos(grid.thetas) == pytest.approx([1 / math.sqrt(3), -1 / math.sqrt(3)])
    assert grid.phis == pytest.approx([0.0, 2 * math.pi / 3, 4 * math.pi / 3])


@pytest.mark.parametrize("L", [1, 3, 8, 17])
def test_make_grid_weights(L):
    grid = make_grid(L)
    assert grid.shape == (L, 2 * L - 1)
    assert grid.theta_weights.sum() == pytest.approx(2.0, abs=1e-12)
    assert np.all(np.diff(grid.thetas) > 0)
    assert grid.sample_weights.sum() == pytest.approx(4 * math.pi, abs=1e-12)


def test_forward_constant_field():
    grid = make_grid(8)
    coeffs = forward_sht(SampledField(grid, np.ones(grid.shape)))
    assert coeffs.values[0] == pytest.approx(math.sqrt(4 * math.pi), abs=1e-12)
    assert np.max(np.abs(coeffs.values[1:])) <= 1e-12


def test_forward_zero_field():
    grid = make_grid(5)
    assert np.all(forward_sht(SampledField(grid, np.zeros(grid.shape))).values == 0)


def test_forward_of_single_harmonic():
    L = 6
    unit = SphericalCoefficients.unit(L, 2, 1)
    back = forward_sht(inverse_sht(unit, make_grid(L)))
    assert np.max(np.abs(back.values - unit.values)) <= 1e-10


def test_inverse_constant():
    L = 8
    coeffs = SphericalCoefficients.unit(L, 0, 0) * math.sqrt(4 * math.pi)
    field = inverse_sht(coeffs, make_grid(L))
    assert np.max(np.abs(field.values - 1.0)) <= 1e-12


def test_inverse_zero():
    field = inverse_sht(SphericalCoefficients.zeros(4), make_grid(4))
    assert np.all(field.values == 0)


@pytest.mark.parametrize("L", [4, 8, 16, 32])
def test_round_trip(L):
    grid = make_grid(L)
    for seed in range(20):
        coeffs = random_bandlimited(L, seed, real=False)
        back = forward_sht(inverse_sht(coeffs, grid))
        assert np.max(np.abs(back.values - coeffs.values)) <= 1e-10


@pytest.mark.parametrize("L", [8, 16])
def test_real_symmetric_coefficients_give_real_field(L):
    coeffs = random_bandlimited(L, seed=3, real=True)
    assert coeffs.is_real_symmetric()
    field = inverse_sht(coeffs, make_grid(L))
    assert np.max(np.abs(field.values.imag)) <= 1e-12


def test_orthonormality():
    L = 8
    grid = make_grid(L)
    harmonics = harmonic_matrix(L, grid.thetas, grid.phis).reshape(L * L, -1)
    weights = grid.sample_weights.reshape(-1)
    gram = (harmonics * weights) @ harmonics.conj().T
    assert np.max(np.abs(gram - np.eye(L * L))) <= 1e-10


def test_addition_theorem():
    L = 8
    rng = np.random.default_rng(0)
    for theta, phi in zip(rng.uniform(0, np.pi, 10), rng.uniform(0, 2 * np.pi, 10)):
        total = np.sum(np.abs(harmonics_at(L, theta, phi)) ** 2)
        assert total == pytest.approx(L * L / (4 * math.pi), abs=1e-10)


def test_integrate_and_inner_product():
    L = 6
    grid = make_grid(L)
    f = random_bandlimited(L, seed=1)
    g = random_bandlimited(L, seed=2)
    product = inverse_sht(f, grid).values * inverse_sht(g, grid).values.conj()
    assert integrate(SampledField(grid, product)) == pytest.approx(
        inner_product(f, g), abs=1e-10
    )


def test_bandlimit_mismatch():
    with pytest.raises(BandlimitMismatchError):
        inverse_sht(SphericalCoefficients.zeros(4), make_grid(5))
    with pytest.raises(BandlimitMismatchError):
        SphericalCoefficients.zeros(4) + SphericalCoefficients.zeros(5)


def test_shape_checks():
    with pytest.raises(InvalidInputError, match="does not match grid"):
        SampledField(make_grid(4), np.zeros((4, 4)))
    with pytest.raises(InvalidInputError, match="Expected 16 coefficients"):
        SphericalCoefficients(4, np.zeros(15))
    with pytest.raises(InvalidInputError, match="positive integer"):
        make_grid(0)
