"""Sifting convolution in harmonic space.

The sifting convolution multiplies harmonic coefficients componentwise,
h_{l,m} = f_{l,m} g_{l,m}. Translating a function to ω₀ is the sifting
convolution with the kernel whose coefficients are Y_{l,m}(ω₀). No
conjugation is applied by default; ``conjugate=True`` gives the
f_{l,m} conj(g_{l,m}) variant for comparison with other conventions.
"""

from __future__ import annotations

import numpy as np

from slepiankit.harmonic import (
    SphericalCoefficients,
    check_same_bandlimit,
    harmonics_at,
)


def sift_convolve(
    f: SphericalCoefficients,
    g: SphericalCoefficients,
    *,
    conjugate: bool = False,
) -> SphericalCoefficients:
    """Componentwise product of two coefficient sets.

    The product is formed from real and imaginary parts so that swapping
    ``f`` and ``g`` gives bit-identical coefficients.
    """
    check_same_bandlimit(f, g)
    fr, fi = f.values.real, f.values.imag
    gr, gi = g.values.real, g.values.imag
    if conjugate:
        gi = -gi
    values = np.empty(f.values.shape, dtype=np.complex128)
    values.real = fr * gr - fi * gi
    values.imag = fr * gi + fi * gr
    return SphericalCoefficients(f.L, values)


def translation_kernel(L: int, theta: float, phi: float) -> SphericalCoefficients:
    """Coefficients Y_{l,m}(θ₀, φ₀) of the kernel that translates to ω₀."""
    return SphericalCoefficients(L, harmonics_at(L, theta, phi))


def translate(
    f: SphericalCoefficients, omega0: tuple[float, float]
) -> SphericalCoefficients:
    """Translate ``f`` to ``omega0 = (theta, phi)``."""
    theta, phi = omega0
    return sift_convolve(f, translation_kernel(f.L, theta, phi))
