"""Scale-discretised wavelets on a discrete spectral line.

The line is any ordered spectral index: harmonic degree l on the whole
sphere, or the rank p of Slepian functions on a region. Generating
functions are built from the smooth bump s(t) = exp(-1/(1 - t²)):

    k_B(t)   = ∫_t^1 s_B²(u)/u du / ∫_{1/B}^1 s_B²(u)/u du
    κ_B(t)   = sqrt(k_B(t/B) - k_B(t))
    η_B(t)   = sqrt(k_B(t))

and κ_j(t) = κ_B(t/B^j), η(t) = η_B(t/B^{J_min}). The squares telescope to
one on every index of the line, which gives exact reconstruction.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.integrate import IntegrationWarning, quad

from slepiankit.exceptions import InvalidInputError, QuadratureError
from slepiankit.harmonic import (
    ComplexArray,
    FloatArray,
    SphericalCoefficients,
    degrees_and_orders,
)
from slepiankit.sifting import sift_convolve
from slepiankit.slepian import SlepianBasis, SlepianCoefficients
from slepiankit.utils.log import logger

QUADRATURE_TOLERANCE = 1e-12
# radicands down to this are roundoff and become zero; below it is a bug
_NEGATIVE_RADICAND_TOLERANCE = -1e-14


def j_max(B: float, T: int) -> int:
    """Largest scale needed to cover a line of length ``T``: ceil(log_B(T-1))."""
    if B <= 1:
        msg = f"Dilation must exceed 1, got {B}"
        raise InvalidInputError(msg)
    if T < 2:
        msg = f"Line length must be at least 2, got {T}"
        raise InvalidInputError(msg)
    j = 0
    # integer search avoids log rounding at exact powers (log(27)/log(3) > 3)
    while B**j < (T - 1) * (1 - 1e-12):
        j += 1
    return j


@dataclass(frozen=True)
class TilingParams:
    """Dilation ``B``, lowest wavelet scale ``J_min`` and line length ``T``."""

    B: float
    J_min: int
    T: int

    def __post_init__(self) -> None:
        if self.J_min < 0:
            msg = f"J_min must be non-negative, got {self.J_min}"
            raise InvalidInputError(msg)
        if self.J_min > self.J_max:
            msg = f"J_min={self.J_min} exceeds J_max={self.J_max} for B={self.B}, T={self.T}"
            raise InvalidInputError(msg)

    @property
    def J_max(self) -> int:
        return j_max(self.B, self.T)


def _bump(t: float) -> float:
    if abs(t) >= 1.0:
        return 0.0
    return math.exp(-1.0 / (1.0 - t * t))


def _integrand(u: float, B: float) -> float:
    s = _bump(2.0 * B * (u - 1.0 / B) / (B - 1.0) - 1.0)
    return s * s / u


def _integrate(a: float, b: float, B: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, error = quad(
                _integrand,
                a,
                b,
                args=(B,),
                epsabs=QUADRATURE_TOLERANCE,
                epsrel=QUADRATURE_TOLERANCE,
                limit=200,
            )
        except IntegrationWarning as e:
            msg = f"Quadrature on [{a}, {b}] for B={B} failed: {e}"
            raise QuadratureError(msg) from e
    if error > QUADRATURE_TOLERANCE:
        msg = f"Quadrature on [{a}, {b}] for B={B} only reached {error:.2e}"
        raise QuadratureError(msg)
    return float(value)


@functools.lru_cache(maxsize=64)
def _normalisation(B: float) -> float:
    return _integrate(1.0 / B, 1.0, B)


@functools.lru_cache(maxsize=65536)
def k_b(t: float, B: float) -> float:
    """Smoothly decreasing k_B with k_B = 1 on [0, 1/B] and 0 on [1, ∞)."""
    lower = 1.0 / B
    if t <= lower:
        return 1.0
    if t >= 1.0:
        return 0.0
    # integrate over the shorter side so the flat ends come out exact
    if t <= (lower + 1.0) / 2.0:
        return 1.0 - _integrate(lower, t, B) / _normalisation(B)
    return _integrate(t, 1.0, B) / _normalisation(B)


def _safe_sqrt(radicand: FloatArray) -> FloatArray:
    worst = float(np.min(radicand, initial=0.0))
    if worst < _NEGATIVE_RADICAND_TOLERANCE:
        msg = f"Negative radicand {worst:.3e} in tiling construction"
        raise QuadratureError(msg)
    return np.sqrt(np.clip(radicand, 0.0, None))


def kappa_b(t: float, B: float) -> float:
    """Mother wavelet generating function κ_B(t)."""
    return float(_safe_sqrt(np.array([k_b(t / B, B) - k_b(t, B)]))[0])


@dataclass(frozen=True, eq=False)
class TilingFunctions:
    """Sampled scaling function η and wavelet functions κ_j on the line."""

    params: TilingParams
    eta: FloatArray
    #: ``kappas[j - J_min]`` holds κ_j
    kappas: FloatArray

    @property
    def scales(self) -> range:
        return range(self.params.J_min, self.params.J_max + 1)

    def kappa(self, j: int) -> FloatArray:
        if j not in self.scales:
            msg = f"Scale {j} outside [{self.params.J_min}, {self.params.J_max}]"
            raise InvalidInputError(msg)
        return self.kappas[j - self.params.J_min]


def build_tiling(params: TilingParams) -> TilingFunctions:
    """Sample η and every κ_j on the integer line ``0 .. T-1``."""
    B, J_min, J_max, T = params.B, params.J_min, params.J_max, params.T
    t = np.arange(T, dtype=np.float64)
    k = {
        j: np.array([k_b(float(u), B) for u in t / B**j])
        for j in range(J_min, J_max + 2)
    }
    eta = _safe_sqrt(k[J_min])
    kappas = np.array([_safe_sqrt(k[j + 1] - k[j]) for j in range(J_min, J_max + 1)])
    logger.debug(
        "Built tiling B=%s J_min=%d J_max=%d on a line of length %d",
        B,
        J_min,
        J_max,
        T,
    )
    return TilingFunctions(params=params, eta=eta, kappas=kappas)


@dataclass(frozen=True, eq=False)
class WaveletCoefficients:
    """Scaling coefficients V(t) and wavelet coefficients W^j(t)."""

    params: TilingParams
    scaling: ComplexArray
    #: ``wavelets[j - J_min]`` holds W^j
    wavelets: ComplexArray
    #: number of input values beyond the line that were dropped
    ignored: int = 0


def _line_values(values: SlepianCoefficients | npt.ArrayLike) -> ComplexArray:
    if isinstance(values, SlepianCoefficients):
        return values.values
    return np.asarray(values, dtype=np.complex128).reshape(-1)


def analysis(
    values: SlepianCoefficients | npt.ArrayLike, tiling: TilingFunctions
) -> WaveletCoefficients:
    """Wavelet transform of line values: V = η f, W^j = κ_j f.

    Values past the end of the line are ignored (and counted); a shorter
    input is treated as zero beyond its end.
    """
    line = _line_values(values)
    T = tiling.params.T
    ignored = max(0, line.size - T)
    if ignored:
        logger.warning("Ignoring %d line values beyond the tiling length %d", ignored, T)
    f = np.zeros(T, dtype=np.complex128)
    f[: min(T, line.size)] = line[:T]
    return WaveletCoefficients(
        params=tiling.params,
        scaling=tiling.eta * f,
        wavelets=tiling.kappas * f,
        ignored=ignored,
    )


def synthesis(w: WaveletCoefficients, tiling: TilingFunctions) -> ComplexArray:
    """Inverse of `analysis`: f = η V + Σ_j κ_j W^j."""
    if w.scaling.shape != tiling.eta.shape or w.wavelets.shape != tiling.kappas.shape:
        msg = (
            f"Wavelet coefficients of shape {w.scaling.shape}/{w.wavelets.shape} do "
            f"not match the tiling {tiling.eta.shape}/{tiling.kappas.shape}"
        )
        raise InvalidInputError(msg)
    return tiling.eta * w.scaling + np.sum(tiling.kappas * w.wavelets, axis=0)


def slepian_line_length(shannon: float, size: int) -> int:
    """Default line for Slepian wavelets: ceil(N), at least 2, at most size."""
    return int(min(size, max(2, math.ceil(shannon - 1e-9))))


def slepian_tiling(
    basis: SlepianBasis, B: float = 2.0, J_min: int = 0, T: int | None = None
) -> TilingFunctions:
    """Tiling of the Slepian rank line of a basis."""
    if T is None:
        T = slepian_line_length(basis.shannon, basis.size)
    return build_tiling(TilingParams(B=B, J_min=J_min, T=T))


def slepian_wavelet(
    basis: SlepianBasis, tiling: TilingFunctions, j: int | None = None
) -> SphericalCoefficients:
    """Harmonic coefficients of Σ_p κ_j(p) s_p, or Σ_p η(p) s_p if ``j`` is None."""
    T = tiling.params.T
    if T > basis.size:
        msg = f"Tiling length {T} exceeds the basis size {basis.size}"
        raise InvalidInputError(msg)
    window = tiling.eta if j is None else tiling.kappa(j)
    return SphericalCoefficients(basis.L, window @ basis.vectors[:T])


def degree_kernel(line: npt.ArrayLike, L: int) -> SphericalCoefficients:
    """Axisymmetric kernel with coefficient ``line[l]`` for every order."""
    line = np.asarray(line)
    if line.size != L:
        msg = f"Degree line must have length L={L}, got {line.size}"
        raise InvalidInputError(msg)
    ls, _ = degrees_and_orders(L)
    return SphericalCoefficients(L, line[ls].astype(np.complex128))


def _check_degree_tiling(f: SphericalCoefficients, tiling: TilingFunctions) -> None:
    if tiling.params.T != f.L:
        msg = f"Degree tiling has length {tiling.params.T}, expected L={f.L}"
        raise InvalidInputError(msg)


def axisymmetric_analysis(
    f: SphericalCoefficients, tiling: TilingFunctions
) -> list[SphericalCoefficients]:
    """Whole-sphere wavelet transform on the harmonic degree line.

    Returns the scaling part first, then one part per scale J_min..J_max.
    """
    _check_degree_tiling(f, tiling)
    windows = [tiling.eta, *tiling.kappas]
    return [sift_convolve(f, degree_kernel(window, f.L)) for window in windows]


def axisymmetric_synthesis(
    parts: list[SphericalCoefficients], tiling: TilingFunctions
) -> SphericalCoefficients:
    """Inverse of `axisymmetric_analysis`."""
    windows = [tiling.eta, *tiling.kappas]
    if len(parts) != len(windows):
        msg = f"Expected {len(windows)} parts, got {len(parts)}"
        raise InvalidInputError(msg)
    L = parts[0].L
    _check_degree_tiling(parts[0], tiling)
    total = SphericalCoefficients.zeros(L)
    for part, window in zip(parts, windows):
        total = total + sift_convolve(part, degree_kernel(window, L))
    return total
