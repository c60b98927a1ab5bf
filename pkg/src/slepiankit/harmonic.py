"""Spherical harmonic synthesis and analysis on a Gauss–Legendre grid.

Conventions: orthonormal harmonics with the Condon–Shortley phase,

    Y_{l,m}(θ, φ) = P̄_l^m(cos θ) e^{imφ}              for m ≥ 0
    Y_{l,-m}      = (-1)^m conj(Y_{l,m})

where P̄_l^m already contains the factor (-1)^m. Coefficients of a bandlimit
``L`` live in a flat array of length ``L**2`` addressed by
``idx(l, m) = l**2 + l + m``.

The grid has ``L`` Gauss–Legendre colatitudes (ascending θ) and ``2L - 1``
equispaced longitudes, which integrates every product of two bandlimited
functions exactly.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.special import roots_legendre

from slepiankit.exceptions import BandlimitMismatchError, InvalidInputError

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]

_INV_SQRT_4PI = 1.0 / math.sqrt(4.0 * math.pi)


def check_bandlimit(L: int) -> int:
    """Validate a bandlimit and return it as a plain int."""
    if isinstance(L, bool) or int(L) != L or L < 1:
        msg = f"Bandlimit must be a positive integer, got {L!r}"
        raise InvalidInputError(msg)
    return int(L)


def idx(l: int, m: int) -> int:
    """Flat index of the coefficient of degree ``l`` and order ``m``."""
    if l < 0 or abs(m) > l:
        msg = f"Invalid harmonic (l={l}, m={m})"
        raise InvalidInputError(msg)
    return l * l + l + m


def lm(index: int) -> tuple[int, int]:
    """Inverse of `idx`."""
    if index < 0:
        msg = f"Flat index must be non-negative, got {index}"
        raise InvalidInputError(msg)
    l = math.isqrt(index)
    return l, index - l * l - l


@functools.lru_cache(maxsize=64)
def degrees_and_orders(L: int) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """Degree and order of every flat index below ``L**2``."""
    L = check_bandlimit(L)
    ls = np.repeat(np.arange(L), 2 * np.arange(L) + 1)
    ms = np.arange(L * L) - ls * ls - ls
    ls.flags.writeable = False
    ms.flags.writeable = False
    return ls, ms


def _check_x(x: npt.ArrayLike) -> FloatArray:
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(np.abs(arr) > 1.0):
        msg = "Legendre argument must lie in [-1, 1]"
        raise InvalidInputError(msg)
    return arr


def legendre_table(L: int, x: npt.ArrayLike) -> FloatArray:
    """Normalized associated Legendre functions for all ``0 <= m <= l < L``.

    Args:
        L: Bandlimit.
        x: Arguments in [-1, 1], typically ``cos(theta)``.

    Returns:
        Array of shape ``(L, L, len(x))`` indexed ``[l, m]``; entries with
        ``m > l`` are zero.
    """
    L = check_bandlimit(L)
    x = _check_x(x)
    sin_theta = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    table = np.zeros((L, L, x.size))
    pmm = np.full(x.size, _INV_SQRT_4PI)
    for m in range(L):
        if m > 0:
            pmm = -math.sqrt((2 * m + 1) / (2 * m)) * sin_theta * pmm
        table[m, m] = pmm
        if m + 1 < L:
            table[m + 1, m] = math.sqrt(2 * m + 3) * x * pmm
        for l in range(m + 2, L):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            table[l, m] = a * (x * table[l - 1, m] - b * table[l - 2, m])
    return table


def normalized_assoc_legendre(l: int, m: int, x: float) -> float:
    """Orthonormal associated Legendre function P̄_l^m(x).

    Includes the Condon–Shortley phase once and uses the three-term
    recurrence seeded at P̄_m^m, so no factorials are formed.

    Raises:
        InvalidInputError: if ``m`` is outside ``[0, l]`` or ``|x| > 1``.
    """
    if m < 0 or m > l:
        msg = f"Order must satisfy 0 <= m <= l, got l={l}, m={m}"
        raise InvalidInputError(msg)
    if abs(x) > 1.0:
        msg = f"Legendre argument must lie in [-1, 1], got {x}"
        raise InvalidInputError(msg)
    sin_theta = math.sqrt(max(0.0, 1.0 - x * x))
    pmm = _INV_SQRT_4PI
    for k in range(1, m + 1):
        pmm = -math.sqrt((2 * k + 1) / (2 * k)) * sin_theta * pmm
    if l == m:
        return pmm
    p_prev, p = pmm, math.sqrt(2 * m + 3) * x * pmm
    for n in range(m + 2, l + 1):
        a = math.sqrt((4 * n * n - 1) / (n * n - m * m))
        b = math.sqrt(((n - 1) ** 2 - m * m) / (4 * (n - 1) ** 2 - 1))
        p_prev, p = p, a * (x * p - b * p_prev)
    return p


def signed_legendre(L: int, x: npt.ArrayLike) -> FloatArray:
    """Rows ``idx(l, m)`` of P̄_l^{|m|}(x), with the (-1)^m of negative orders.

    With this table ``Y_{l,m}(θ, φ) = table[idx(l, m)] * exp(i m φ)`` for
    every order, negative ones included.
    """
    table = legendre_table(L, x)
    ls, ms = degrees_and_orders(L)
    signs = np.where((ms < 0) & (ms % 2 == 1), -1.0, 1.0)
    return table[ls, np.abs(ms)] * signs[:, None]


def spherical_harmonic(l: int, m: int, theta: float, phi: float) -> complex:
    """Orthonormal spherical harmonic Y_{l,m}(θ, φ)."""
    if l < 0 or abs(m) > l:
        msg = f"Order must satisfy |m| <= l, got l={l}, m={m}"
        raise InvalidInputError(msg)
    value = normalized_assoc_legendre(l, abs(m), math.cos(theta)) * complex(
        math.cos(abs(m) * phi), math.sin(abs(m) * phi)
    )
    if m < 0:
        value = (-1) ** m * value.conjugate()
    return value


def harmonic_matrix(
    L: int, thetas: npt.ArrayLike, phis: npt.ArrayLike
) -> ComplexArray:
    """All harmonics of bandlimit ``L`` on the tensor grid ``thetas x phis``.

    Returns:
        Array of shape ``(L**2, len(thetas), len(phis))``.
    """
    L = check_bandlimit(L)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    phis = np.atleast_1d(np.asarray(phis, dtype=np.float64))
    _, ms = degrees_and_orders(L)
    legendre = signed_legendre(L, np.cos(thetas))
    azimuth = np.exp(1j * np.outer(ms, phis))
    return legendre[:, :, None] * azimuth[:, None, :]


def harmonics_at(L: int, theta: float, phi: float) -> ComplexArray:
    """Vector of Y_{l,m}(θ, φ) for every flat index below ``L**2``."""
    return harmonic_matrix(L, [theta], [phi])[:, 0, 0]


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Gauss–Legendre colatitudes times equispaced longitudes."""

    L: int
    thetas: FloatArray
    theta_weights: FloatArray
    phis: FloatArray

    @property
    def n_theta(self) -> int:
        return int(self.thetas.size)

    @property
    def n_phi(self) -> int:
        return int(self.phis.size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_theta, self.n_phi

    @property
    def sample_weights(self) -> FloatArray:
        """Quadrature weight of every sample, ``w_i * 2π / n_φ``."""
        return np.outer(self.theta_weights, np.full(self.n_phi, 2 * np.pi / self.n_phi))


@functools.lru_cache(maxsize=32)
def make_grid(L: int) -> QuadratureGrid:
    """Sampling grid for bandlimit ``L``; the same object is returned per L."""
    L = check_bandlimit(L)
    nodes, weights = roots_legendre(L)
    order = np.argsort(-nodes)
    thetas = np.arccos(nodes[order])
    theta_weights = np.asarray(weights[order], dtype=np.float64)
    phis = 2 * np.pi * np.arange(2 * L - 1) / (2 * L - 1)
    for arr in (thetas, theta_weights, phis):
        arr.flags.writeable = False
    return QuadratureGrid(L=L, thetas=thetas, theta_weights=theta_weights, phis=phis)


@functools.lru_cache(maxsize=32)
def _grid_legendre(L: int) -> FloatArray:
    table = signed_legendre(L, np.cos(make_grid(L).thetas))
    table.flags.writeable = False
    return table


@dataclass(frozen=True, eq=False)
class SphericalCoefficients:
    """Harmonic coefficients f_{l,m} of a bandlimited function."""

    L: int
    values: ComplexArray

    def __post_init__(self) -> None:
        L = check_bandlimit(self.L)
        values = np.array(self.values, dtype=np.complex128).reshape(-1)
        if values.size != L * L:
            msg = f"Expected {L * L} coefficients for L={L}, got {values.size}"
            raise InvalidInputError(msg)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, L: int) -> SphericalCoefficients:
        return cls(L, np.zeros(check_bandlimit(L) ** 2, dtype=np.complex128))

    @classmethod
    def unit(cls, L: int, l: int, m: int) -> SphericalCoefficients:
        """Coefficients of the single harmonic Y_{l,m}."""
        coeffs = np.zeros(check_bandlimit(L) ** 2, dtype=np.complex128)
        if l >= L:
            msg = f"Degree {l} is not below the bandlimit {L}"
            raise InvalidInputError(msg)
        coeffs[idx(l, m)] = 1.0
        return cls(L, coeffs)

    def coefficient(self, l: int, m: int) -> complex:
        return complex(self.values[idx(l, m)])

    def is_real_symmetric(self, atol: float = 1e-12) -> bool:
        """Whether the coefficients describe a real-valued field."""
        ls, ms = degrees_and_orders(self.L)
        mirror = self.values[ls * ls + ls - ms]
        expected = np.where(ms % 2 == 0, 1.0, -1.0) * np.conj(self.values)
        return bool(np.all(np.abs(mirror - expected) <= atol))

    def __add__(self, other: SphericalCoefficients) -> SphericalCoefficients:
        check_same_bandlimit(self, other)
        return SphericalCoefficients(self.L, self.values + other.values)

    def __sub__(self, other: SphericalCoefficients) -> SphericalCoefficients:
        check_same_bandlimit(self, other)
        return SphericalCoefficients(self.L, self.values - other.values)

    def __mul__(self, scalar: complex) -> SphericalCoefficients:
        return SphericalCoefficients(self.L, self.values * scalar)

    __rmul__ = __mul__


def check_same_bandlimit(a: SphericalCoefficients, b: SphericalCoefficients) -> None:
    """Raise if two coefficient sets were built for different bandlimits."""
    if a.L != b.L:
        msg = f"Bandlimits differ: {a.L} != {b.L}"
        raise BandlimitMismatchError(msg)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Values of a function on a `QuadratureGrid`, θ along rows."""

    grid: QuadratureGrid
    values: ComplexArray

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.shape != self.grid.shape:
            msg = f"Field shape {values.shape} does not match grid {self.grid.shape}"
            raise InvalidInputError(msg)
        object.__setattr__(self, "values", values.astype(np.complex128))

    def is_real(self, atol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.values.imag), initial=0.0) <= atol)

    def real_part(self) -> FloatArray:
        return np.ascontiguousarray(self.values.real)


def forward_sht(field: SampledField) -> SphericalCoefficients:
    """Analysis: f_{l,m} = Σ_ij w_i (2π/n_φ) field_ij conj(Y_{l,m}(θ_i, φ_j))."""
    grid = field.grid
    L = grid.L
    if grid.shape != (L, 2 * L - 1):
        msg = f"Field grid of shape {grid.shape} was not built for L={L}"
        raise InvalidInputError(msg)
    orders = np.arange(-(L - 1), L)
    azimuth = np.exp(-1j * np.outer(grid.phis, orders)) * (2 * np.pi / grid.n_phi)
    partial = (field.values @ azimuth) * grid.theta_weights[:, None]
    _, ms = degrees_and_orders(L)
    values = np.einsum("ki,ik->k", _grid_legendre(L), partial[:, ms + L - 1])
    return SphericalCoefficients(L, values)


def inverse_sht(coeffs: SphericalCoefficients, grid: QuadratureGrid) -> SampledField:
    """Synthesis: field_ij = Σ_{l,m} f_{l,m} Y_{l,m}(θ_i, φ_j)."""
    L = coeffs.L
    if grid.L != L:
        msg = f"Coefficients have L={L} but the grid has L={grid.L}"
        raise BandlimitMismatchError(msg)
    _, ms = degrees_and_orders(L)
    one_hot = np.zeros((L * L, 2 * L - 1))
    one_hot[np.arange(L * L), ms + L - 1] = 1.0
    per_order = (_grid_legendre(L) * coeffs.values[:, None]).T @ one_hot
    orders = np.arange(-(L - 1), L)
    values = per_order @ np.exp(1j * np.outer(orders, grid.phis))
    return SampledField(grid, values)


def integrate(field: SampledField) -> complex:
    """Quadrature integral of a sampled field over the whole sphere."""
    return complex(np.sum(field.grid.sample_weights * field.values))


def inner_product(f: SphericalCoefficients, g: SphericalCoefficients) -> complex:
    """Whole-sphere inner product ⟨f, g⟩ = Σ f_{l,m} conj(g_{l,m})."""
    check_same_bandlimit(f, g)
    return complex(np.vdot(g.values, f.values))
