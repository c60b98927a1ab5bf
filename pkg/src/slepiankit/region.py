"""Concentration regions on the sphere.

Three kinds of region are supported: a polar cap around the north pole, a
colatitude-longitude box, and an arbitrary boolean raster on the sampling
grid of a fixed bandlimit. Regions are plain values; `rasterize` turns them
into per-sample quadrature weights, `region_quadrature` into a quadrature
rule that follows the exact boundary where one is known.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, TypeAlias

import numpy as np
import numpy.typing as npt
from scipy.special import roots_legendre

from slepiankit.exceptions import (
    BandlimitMismatchError,
    InvalidInputError,
    RegionParseError,
)
from slepiankit.harmonic import FloatArray, QuadratureGrid, check_bandlimit, make_grid
from slepiankit.utils.log import logger
from slepiankit.utils.templates import render_template

_FULL_CIRCLE_TOL = 1e-12


@dataclass(frozen=True)
class PolarCap:
    """All points with colatitude at most ``theta_max`` (radians)."""

    theta_max: float

    def __post_init__(self) -> None:
        if not 0.0 < self.theta_max <= math.pi:
            msg = f"Polar cap needs 0 < theta_max <= pi, got {self.theta_max}"
            raise InvalidInputError(msg)

    def canonical(self) -> str:
        return f"polar-cap:{float(self.theta_max)!r}"


@dataclass(frozen=True)
class LatLonBox:
    """Colatitude-longitude box, all angles in radians."""

    theta_min: float
    theta_max: float
    phi_min: float
    phi_max: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta_min < self.theta_max <= math.pi:
            msg = (
                "Box needs 0 <= theta_min < theta_max <= pi, got "
                f"theta_min={self.theta_min}, theta_max={self.theta_max}"
            )
            raise InvalidInputError(msg)
        if not 0.0 <= self.phi_min < self.phi_max <= 2 * math.pi:
            msg = (
                "Box needs 0 <= phi_min < phi_max <= 2 pi, got "
                f"phi_min={self.phi_min}, phi_max={self.phi_max}"
            )
            raise InvalidInputError(msg)

    @property
    def is_full_circle(self) -> bool:
        return self.phi_max - self.phi_min >= 2 * math.pi - _FULL_CIRCLE_TOL

    def canonical(self) -> str:
        angles = (self.theta_min, self.theta_max, self.phi_min, self.phi_max)
        return "latlon:" + ",".join(repr(float(a)) for a in angles)


@dataclass(frozen=True, eq=False)
class MaskRaster:
    """Boolean mask on the sampling grid of bandlimit ``L``."""

    L: int
    mask: npt.NDArray[np.bool_]

    def __post_init__(self) -> None:
        L = check_bandlimit(self.L)
        mask = np.array(self.mask, dtype=bool)
        if mask.shape != (L, 2 * L - 1):
            msg = f"Mask of shape {mask.shape} does not match the L={L} grid {(L, 2 * L - 1)}"
            raise RegionParseError(msg)
        mask.flags.writeable = False
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "mask", mask)

    def complement(self) -> MaskRaster:
        return MaskRaster(self.L, ~self.mask)

    def canonical(self) -> str:
        digest = hashlib.sha256(np.packbits(self.mask).tobytes()).hexdigest()
        return f"mask:L={self.L}:{digest}"


Region: TypeAlias = PolarCap | LatLonBox | MaskRaster


@dataclass(frozen=True, eq=False)
class RegionQuadrature:
    """Tensor quadrature rule ``weights[i, j]`` at ``(thetas[i], phis[j])``."""

    thetas: FloatArray
    phis: FloatArray
    weights: FloatArray

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True, eq=False)
class RegionWeights:
    """Sphere-grid quadrature weights, zero outside the region."""

    grid: QuadratureGrid
    weights: FloatArray

    @property
    def inside(self) -> npt.NDArray[np.bool_]:
        return self.weights > 0

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))

    def as_quadrature(self) -> RegionQuadrature:
        return RegionQuadrature(self.grid.thetas, self.grid.phis, self.weights)


def rasterize(region: Region, grid: QuadratureGrid) -> RegionWeights:
    """Weights of the grid samples whose centres lie in the region.

    Samples exactly on the boundary count as inside.

    Raises:
        BandlimitMismatchError: if a mask was drawn for another bandlimit.
    """
    match region:
        case PolarCap(theta_max=theta_max):
            inside = np.repeat((grid.thetas <= theta_max)[:, None], grid.n_phi, axis=1)
        case LatLonBox(
            theta_min=theta_min, theta_max=theta_max, phi_min=phi_min, phi_max=phi_max
        ):
            in_theta = (grid.thetas >= theta_min) & (grid.thetas <= theta_max)
            in_phi = (grid.phis >= phi_min) & (grid.phis <= phi_max)
            inside = np.outer(in_theta, in_phi)
        case MaskRaster(L=L, mask=mask):
            if grid.L != L:
                msg = f"Mask was drawn for L={L} but the grid has L={grid.L}"
                raise BandlimitMismatchError(msg)
            inside = mask
        case _:
            msg = f"Unknown region {region!r}"
            raise InvalidInputError(msg)
    return RegionWeights(grid, np.where(inside, grid.sample_weights, 0.0))


def closed_form_area_fraction(region: Region) -> float | None:
    """Exact fraction of the sphere covered, if there is a closed form."""
    match region:
        case PolarCap(theta_max=theta_max):
            return (1.0 - math.cos(theta_max)) / 2.0
        case LatLonBox(
            theta_min=theta_min, theta_max=theta_max, phi_min=phi_min, phi_max=phi_max
        ):
            return (
                (math.cos(theta_min) - math.cos(theta_max))
                * (phi_max - phi_min)
                / (4.0 * math.pi)
            )
        case _:
            return None


def raster_area_fraction(region: Region, grid: QuadratureGrid) -> float:
    """Quadrature area of the rasterized region over 4π."""
    return rasterize(region, grid).area / (4.0 * math.pi)


def area_fraction(region: Region, grid: QuadratureGrid) -> float:
    """Fraction of the sphere covered by the region.

    The closed form wins whenever it exists (caps and boxes); masks fall
    back to the raster sum on ``grid``.
    """
    exact = closed_form_area_fraction(region)
    if exact is not None:
        return exact
    return raster_area_fraction(region, grid)


def _gauss_interval(a: float, b: float, n: int) -> tuple[FloatArray, FloatArray]:
    nodes, weights = roots_legendre(n)
    half = (b - a) / 2.0
    return half * nodes + (a + b) / 2.0, half * weights


def _theta_rule(L: int, theta_min: float, theta_max: float) -> tuple[FloatArray, FloatArray]:
    # harmonic products times sin(theta) are trigonometric polynomials of degree 2L-1
    n = math.ceil((2 * L - 1) * (theta_max - theta_min) / 2.0) + 20
    thetas, weights = _gauss_interval(theta_min, theta_max, n)
    return thetas, weights * np.sin(thetas)


def _phi_rule(L: int, phi_min: float, phi_max: float) -> tuple[FloatArray, FloatArray]:
    if phi_max - phi_min >= 2 * math.pi - _FULL_CIRCLE_TOL:
        n = 2 * L - 1
        return phi_min + 2 * np.pi * np.arange(n) / n, np.full(n, 2 * np.pi / n)
    n = math.ceil((2 * L - 2) * (phi_max - phi_min) / 2.0) + 20
    return _gauss_interval(phi_min, phi_max, n)


def region_quadrature(region: Region, L: int) -> RegionQuadrature:
    """Quadrature rule over the region for products of bandlimit-L functions.

    Caps and boxes get a Gauss rule fitted to their exact boundary, which
    integrates such products to roundoff. Masks only exist on the sphere
    grid, so their rule is the rasterized grid weights.
    """
    L = check_bandlimit(L)
    match region:
        case PolarCap(theta_max=theta_max):
            thetas, w_theta = _theta_rule(L, 0.0, theta_max)
            phis, w_phi = _phi_rule(L, 0.0, 2 * math.pi)
        case LatLonBox(
            theta_min=theta_min, theta_max=theta_max, phi_min=phi_min, phi_max=phi_max
        ):
            thetas, w_theta = _theta_rule(L, theta_min, theta_max)
            phis, w_phi = _phi_rule(L, phi_min, phi_max)
        case MaskRaster():
            return rasterize(region, make_grid(L)).as_quadrature()
        case _:
            msg = f"Unknown region {region!r}"
            raise InvalidInputError(msg)
    logger.debug(
        "Region quadrature for %s at L=%d: %d x %d nodes",
        region.canonical(),
        L,
        thetas.size,
        phis.size,
    )
    return RegionQuadrature(thetas, phis, np.outer(w_theta, w_phi))


def _parse_degrees(token: str, text: str) -> float:
    try:
        value = float(token)
    except ValueError:
        msg = f"Could not parse angle {token!r} in region {text!r}"
        raise RegionParseError(msg) from None
    if not math.isfinite(value):
        msg = f"Angle {token!r} in region {text!r} is not finite"
        raise RegionParseError(msg)
    return value


def parse_region(text: str) -> Region:
    """Parse a textual region description.

    Grammar (angles in degrees)::

        polar-cap:<theta_max>
        latlon:<theta_min>,<theta_max>,<phi_min>,<phi_max>
        mask:<path>

    Raises:
        RegionParseError: malformed text or out-of-range angles.
        FileNotFoundError: the mask file does not exist.
    """
    kind, sep, rest = text.partition(":")
    if not sep or not rest:
        msg = f"Region {text!r} must look like '<kind>:<arguments>'"
        raise RegionParseError(msg)
    match kind:
        case "polar-cap":
            theta_max = _parse_degrees(rest, text)
            if not 0.0 < theta_max <= 180.0:
                msg = f"Polar cap angle {rest!r} must lie in (0, 180]"
                raise RegionParseError(msg)
            return PolarCap(math.radians(theta_max))
        case "latlon":
            tokens = rest.split(",")
            if len(tokens) != 4:
                msg = f"Box {text!r} needs 4 comma separated angles, got {len(tokens)}"
                raise RegionParseError(msg)
            angles = [_parse_degrees(t, text) for t in tokens]
            try:
                return LatLonBox(*(math.radians(a) for a in angles))
            except InvalidInputError as e:
                raise RegionParseError(str(e)) from e
        case "mask":
            return read_mask(Path(rest))
        case _:
            msg = f"Unknown region kind {kind!r} in {text!r}"
            raise RegionParseError(msg)


def read_mask(path: str | os.PathLike[Any]) -> MaskRaster:
    """Read a mask raster written in the ``L=<int>`` + rows of 0/1 format."""
    path = Path(path)
    if not path.is_file():
        msg = f"Mask file {path} does not exist"
        raise FileNotFoundError(msg)
    lines = [line.strip() for line in path.read_text().splitlines()]
    lines = [line for line in lines if line]
    if not lines or not lines[0].startswith("L="):
        msg = f"{path}: line 1 must read 'L=<int>'"
        raise RegionParseError(msg)
    try:
        L = int(lines[0][2:])
    except ValueError:
        msg = f"{path}: line 1: could not parse bandlimit {lines[0][2:]!r}"
        raise RegionParseError(msg) from None
    if L < 1:
        msg = f"{path}: line 1: bandlimit must be positive, got {L}"
        raise RegionParseError(msg)
    rows = lines[1:]
    if len(rows) != L:
        msg = f"{path}: expected {L} mask rows for L={L}, got {len(rows)}"
        raise RegionParseError(msg)
    mask = np.zeros((L, 2 * L - 1), dtype=bool)
    for i, row in enumerate(rows):
        tokens = row.split()
        if len(tokens) != 2 * L - 1:
            msg = f"{path}: line {i + 2}: expected {2 * L - 1} entries, got {len(tokens)}"
            raise RegionParseError(msg)
        for j, token in enumerate(tokens):
            if token not in ("0", "1"):
                msg = f"{path}: line {i + 2}: mask entries must be 0 or 1, got {token!r}"
                raise RegionParseError(msg)
            mask[i, j] = token == "1"
    logger.debug("Read mask for L=%d with %d samples inside", L, int(mask.sum()))
    return MaskRaster(L, mask)


def write_mask(region: MaskRaster, path: str | os.PathLike[Any]) -> None:
    """Write a mask raster in the format understood by `read_mask`."""
    rows = [" ".join("1" if v else "0" for v in row) for row in region.mask]
    Path(path).write_text(render_template("mask.txt.j2", L=region.L, rows=rows))
