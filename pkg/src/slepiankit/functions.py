"""Built-in functions on the sphere, given by their harmonic coefficients.

Random coefficients come from numpy's PCG64 bit generator
(``np.random.Generator(np.random.PCG64(seed))``), whose stream is fixed
across platforms for a given seed.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from slepiankit.exceptions import InvalidInputError
from slepiankit.harmonic import (
    SampledField,
    SphericalCoefficients,
    check_bandlimit,
    degrees_and_orders,
    forward_sht,
    harmonics_at,
    make_grid,
)


def _check_width(name: str, value: float) -> float:
    if not value > 0:
        msg = f"{name} must be positive, got {value}"
        raise InvalidInputError(msg)
    return float(value)


def gaussian(L: int, sigma: float) -> SphericalCoefficients:
    """Axisymmetric bell at the north pole: f_{l,0} = exp(-l(l+1) σ²)."""
    L = check_bandlimit(L)
    sigma = _check_width("sigma", sigma)
    ls, ms = degrees_and_orders(L)
    values = np.where(ms == 0, np.exp(-ls * (ls + 1) * sigma**2), 0.0)
    return SphericalCoefficients(L, values)


def elongated_gaussian(L: int, sigma_theta: float, sigma_phi: float) -> SphericalCoefficients:
    """Gaussian on the equator at φ = 0 with separate widths in θ and φ.

    The function is sampled on the grid and analysed, so the returned
    coefficients are its bandlimited definition.
    """
    sigma_theta = _check_width("sigma_theta", sigma_theta)
    sigma_phi = _check_width("sigma_phi", sigma_phi)
    grid = make_grid(check_bandlimit(L))
    phi_wrapped = np.mod(grid.phis + np.pi, 2 * np.pi) - np.pi
    exponent = (
        ((grid.thetas - np.pi / 2) ** 2 / (2 * sigma_theta**2))[:, None]
        + (phi_wrapped**2 / (2 * sigma_phi**2))[None, :]
    )
    return forward_sht(SampledField(grid, np.exp(-exponent)))


def random_bandlimited(L: int, seed: int = 0, real: bool = True) -> SphericalCoefficients:
    """Unit-normal random coefficients, conjugate symmetric when ``real``."""
    L = check_bandlimit(L)
    rng = np.random.Generator(np.random.PCG64(seed))
    n = L * L
    values = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    if real:
        ls, ms = degrees_and_orders(L)
        values[ms == 0] = values[ms == 0].real
        negative = ms < 0
        mirror = ls[negative] * ls[negative] - ms[negative] + ls[negative]
        signs = np.where(ms[negative] % 2 == 0, 1.0, -1.0)
        values[negative] = signs * np.conj(values[mirror])
    return SphericalCoefficients(L, values)


def dirac_delta(L: int, theta0: float, phi0: float) -> SphericalCoefficients:
    """Bandlimited Dirac delta at (θ₀, φ₀): f_{l,m} = conj(Y_{l,m}(θ₀, φ₀))."""
    return SphericalCoefficients(L, np.conj(harmonics_at(check_bandlimit(L), theta0, phi0)))


def harmonic(L: int, l: int, m: int) -> SphericalCoefficients:
    """A single spherical harmonic Y_{l,m}."""
    return SphericalCoefficients.unit(L, l, m)


Generator = Callable[[int, Mapping[str, float], int], SphericalCoefficients]


@dataclass(frozen=True)
class NamedFunction:
    """A function addressable by name with typed default parameters."""

    name: str
    generator: Generator
    defaults: Mapping[str, float] = field(default_factory=dict)
    #: whether the resolved parameters give a real field
    real: Callable[[Mapping[str, float]], bool] = lambda _: True

    def resolve(self, params: Mapping[str, str | float] | None = None) -> dict[str, float]:
        """Merge ``params`` over the defaults, casting to the defaults' types."""
        resolved: dict[str, float] = dict(self.defaults)
        for key, value in (params or {}).items():
            if key not in self.defaults:
                known = ", ".join(sorted(self.defaults)) or "none"
                msg = f"Unknown parameter {key!r} for {self.name} (known: {known})"
                raise InvalidInputError(msg)
            kind = type(self.defaults[key])
            try:
                resolved[key] = kind(value)
            except ValueError:
                msg = f"Parameter {key}={value!r} for {self.name} is not a valid {kind.__name__}"
                raise InvalidInputError(msg) from None
        return resolved

    def is_real(self, params: Mapping[str, str | float] | None = None) -> bool:
        """True when the coefficients are conjugate symmetric for ``params``."""
        return self.real(self.resolve(params))

    def __call__(
        self,
        L: int,
        params: Mapping[str, str | float] | None = None,
        seed: int = 0,
    ) -> SphericalCoefficients:
        return self.generator(L, self.resolve(params), seed)


FUNCTIONS: dict[str, NamedFunction] = {
    f.name: f
    for f in (
        NamedFunction(
            "gaussian",
            lambda L, p, _: gaussian(L, p["sigma"]),
            {"sigma": 0.1},
        ),
        NamedFunction(
            "elongated_gaussian",
            lambda L, p, _: elongated_gaussian(L, p["sigma_theta"], p["sigma_phi"]),
            {"sigma_theta": 0.1, "sigma_phi": 0.1},
        ),
        NamedFunction(
            "random",
            lambda L, p, seed: random_bandlimited(L, seed, real=bool(p["real"])),
            {"real": 1},
            real=lambda p: bool(p["real"]),
        ),
        NamedFunction(
            "dirac_delta",
            lambda L, p, _: dirac_delta(L, p["theta0"], p["phi0"]),
            {"theta0": 0.0, "phi0": 0.0},
        ),
        NamedFunction(
            "harmonic",
            lambda L, p, _: harmonic(L, int(p["l"]), int(p["m"])),
            {"l": 0, "m": 0},
            real=lambda p: int(p["m"]) == 0,
        ),
    )
}
