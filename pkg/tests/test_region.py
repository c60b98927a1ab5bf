import math
from dataclasses import astuple
from pathlib import Path

import numpy as np
import pytest

from slepiankit.exceptions import (
    BandlimitMismatchError,
    InvalidInputError,
    RegionParseError,
)
from slepiankit.harmonic import make_grid
from slepiankit.region import (
    LatLonBox,
    MaskRaster,
    PolarCap,
    area_fraction,
    closed_form_area_fraction,
    parse_region,
    raster_area_fraction,
    rasterize,
    read_mask,
    region_quadrature,
    write_mask,
)


def _random_mask(L: int, seed: int = 0) -> MaskRaster:
    rng = np.random.default_rng(seed)
    return MaskRaster(L, rng.random((L, 2 * L - 1)) < 0.4)


def test_rasterize_whole_sphere():
    grid = make_grid(8)
    for region in (PolarCap(math.pi), LatLonBox(0, math.pi, 0, 2 * math.pi)):
        weights = rasterize(region, grid)
        assert weights.inside.all()
        assert np.array_equal(weights.weights, grid.sample_weights)


def test_rasterize_tiny_cap_is_empty():
    grid = make_grid(8)
    assert not rasterize(PolarCap(1e-3), grid).inside.any()


def test_rasterize_boundary_sample_is_inside():
    grid = make_grid(8)
    cap = PolarCap(float(grid.thetas[2]))
    inside = rasterize(cap, grid).inside
    assert inside[:3].all()
    assert not inside[3:].any()


def test_rasterize_box():
    grid = make_grid(8)
    weights = rasterize(LatLonBox(0, math.pi / 2, 0, math.pi), grid)
    assert np.array_equal(weights.inside[:, 0], grid.thetas <= math.pi / 2)
    assert np.array_equal(weights.inside[0], grid.phis <= math.pi)
    assert np.all(weights.weights >= 0)


def test_rasterize_mask_bandlimit_mismatch():
    with pytest.raises(BandlimitMismatchError):
        rasterize(_random_mask(4), make_grid(5))


@pytest.mark.parametrize(
    ("region", "expected"),
    [
        (PolarCap(math.pi), 1.0),
        (PolarCap(math.pi / 3), 0.25),
        (LatLonBox(0, math.pi, 0, math.pi), 0.5),
        (LatLonBox(0, math.pi / 2, 0, 2 * math.pi), 0.5),
    ],
)
def test_area_fraction(region, expected):
    assert area_fraction(region, make_grid(8)) == pytest.approx(expected, abs=1e-15)


def test_mask_has_no_closed_form():
    mask = _random_mask(6)
    assert closed_form_area_fraction(mask) is None
    assert area_fraction(mask, make_grid(6)) == raster_area_fraction(mask, make_grid(6))


@pytest.mark.parametrize("L", [16, 24])
@pytest.mark.parametrize("degrees", [30, 60, 90, 120])
def test_cap_raster_area_close_to_closed_form(L, degrees):
    cap = PolarCap(math.radians(degrees))
    raster = raster_area_fraction(cap, make_grid(L))
    assert abs(raster - (1 - math.cos(cap.theta_max)) / 2) <= 2 / L


def test_cap_area_monotone():
    grid = make_grid(16)
    angles = np.linspace(0.05, math.pi, 40)
    for fn in (area_fraction, raster_area_fraction):
        fractions = [fn(PolarCap(float(a)), grid) for a in angles]
        assert all(a <= b for a, b in zip(fractions, fractions[1:]))


def test_mask_complement():
    grid = make_grid(7)
    mask = _random_mask(7, seed=4)
    total = rasterize(mask, grid).weights + rasterize(mask.complement(), grid).weights
    whole = rasterize(PolarCap(math.pi), grid).weights
    assert np.array_equal(total, whole)


@pytest.mark.parametrize(
    "region",
    [
        PolarCap(math.pi / 3),
        PolarCap(math.pi),
        LatLonBox(0.3, 1.9, 0.5, 4.0),
        LatLonBox(0, math.pi / 2, 0, 2 * math.pi),
    ],
)
def test_region_quadrature_area(region):
    quadrature = region_quadrature(region, 12)
    expected = 4 * math.pi * closed_form_area_fraction(region)
    assert quadrature.area == pytest.approx(expected, abs=1e-12)


def test_region_quadrature_of_mask_is_raster():
    mask = _random_mask(5)
    quadrature = region_quadrature(mask, 5)
    assert np.array_equal(quadrature.weights, rasterize(mask, make_grid(5)).weights)


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("polar-cap:60", PolarCap(math.pi / 3)),
        ("polar-cap:180", PolarCap(math.pi)),
        ("latlon:0,90,0,180", LatLonBox(0, math.pi / 2, 0, math.pi)),
    ],
)
def test_parse_region(text, expected):
    region = parse_region(text)
    assert type(region) is type(expected)
    assert astuple(region) == pytest.approx(astuple(expected), abs=1e-15)


@pytest.mark.parametrize(
    ("text", "match"),
    [
        ("polar-cap:190", "must lie in"),
        ("polar-cap:0", "must lie in"),
        ("polar-cap:abc", "'abc'"),
        ("latlon:0,90,0", "needs 4"),
        ("latlon:90,0,0,180", "theta_min"),
        ("disc:30", "Unknown region kind"),
        ("polar-cap", "must look like"),
    ],
)
def test_parse_region_errors(text, match):
    with pytest.raises(RegionParseError, match=match):
        parse_region(text)


def test_mask_file_round_trip(tmp_path: Path):
    mask = _random_mask(5, seed=2)
    path = tmp_path / "mask.txt"
    write_mask(mask, path)
    text = path.read_text()
    assert text.startswith("L=5\n")
    assert len(text.splitlines()) == 6
    recovered = parse_region(f"mask:{path}")
    assert isinstance(recovered, MaskRaster)
    assert np.array_equal(recovered.mask, mask.mask)
    assert recovered.canonical() == mask.canonical()


def test_mask_file_errors(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        read_mask(tmp_path / "missing.txt")

    path = tmp_path / "bad.txt"
    path.write_text("L=2\n0 1 1\n0 2 1\n")
    with pytest.raises(RegionParseError, match="line 3"):
        read_mask(path)

    path.write_text("L=2\n0 1 1\n")
    with pytest.raises(RegionParseError, match="expected 2 mask rows"):
        read_mask(path)

    path.write_text("0 1 1\n")
    with pytest.raises(RegionParseError, match="line 1"):
        read_mask(path)


def test_region_validation():
    with pytest.raises(InvalidInputError):
        PolarCap(0.0)
    with pytest.raises(InvalidInputError):
        LatLonBox(0, 1, 2, 1)
    with pytest.raises(RegionParseError):
        MaskRaster(3, np.zeros((3, 4), dtype=bool))
