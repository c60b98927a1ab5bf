import hashlib
import math

import numpy as np
import pytest

from slepiankit.exceptions import InvalidInputError
from slepiankit.functions import (
    FUNCTIONS,
    dirac_delta,
    elongated_gaussian,
    gaussian,
    harmonic,
    random_bandlimited,
)
from slepiankit.harmonic import inverse_sht, make_grid


def test_gaussian():
    f = gaussian(8, 0.1)
    assert f.coefficient(2, 0) == pytest.approx(0.9417645336, abs=1e-10)
    assert f.coefficient(0, 0) == 1
    assert f.coefficient(3, 1) == 0
    assert f.is_real_symmetric()


def test_elongated_gaussian():
    L = 16
    f = elongated_gaussian(L, 0.2, 0.4)
    assert f.is_real_symmetric(atol=1e-10)
    field = inverse_sht(f, make_grid(L)).real_part()
    peak = np.unravel_index(np.argmax(field), field.shape)
    # peak sits on the equator rows at φ = 0
    assert peak[1] == 0
    assert abs(make_grid(L).thetas[peak[0]] - math.pi / 2) < math.pi / L


@pytest.mark.parametrize(
    "build",
    [
        lambda: gaussian(8, 0.0),
        lambda: gaussian(8, -1.0),
        lambda: elongated_gaussian(8, 0.0, 0.1),
        lambda: elongated_gaussian(8, 0.1, 0.0),
    ],
)
def test_widths_must_be_positive(build):
    with pytest.raises(InvalidInputError, match="must be positive"):
        build()


def test_random_is_deterministic():
    a = random_bandlimited(8, seed=11)
    b = random_bandlimited(8, seed=11)
    c = random_bandlimited(8, seed=12)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert a.is_real_symmetric()
    assert not random_bandlimited(8, seed=11, real=False).is_real_symmetric()


def test_random_golden_checksum():
    f = random_bandlimited(8, seed=0)
    assert f.values[0] == 0.1257302210933933
    digest = hashlib.sha256(f.values.tobytes()).hexdigest()
    assert digest == "5829bb6a314e0ffaa810b9d880e498565c8efc83f78d88f6be791e3231d96e1c"


def test_dirac_delta_peaks_at_its_point():
    L = 12
    grid = make_grid(L)
    i, j = 4, 7
    field = inverse_sht(dirac_delta(L, grid.thetas[i], grid.phis[j]), grid)
    assert np.max(np.abs(field.values.imag)) <= 1e-10
    assert np.unravel_index(np.argmax(field.values.real), grid.shape) == (i, j)
    assert field.values[i, j].real == pytest.approx(L * L / (4 * math.pi), rel=1e-10)


def test_harmonic():
    f = harmonic(6, 3, -2)
    assert f.coefficient(3, -2) == 1
    assert np.count_nonzero(f.values) == 1


def test_registry_defaults_and_params():
    assert set(FUNCTIONS) == {"gaussian", "elongated_gaussian", "random", "dirac_delta", "harmonic"}
    f = FUNCTIONS["gaussian"](8, {"sigma": "0.1"})
    assert np.array_equal(f.values, gaussian(8, 0.1).values)
    g = FUNCTIONS["harmonic"](4, {"l": "2", "m": "1"})
    assert g.coefficient(2, 1) == 1
    r = FUNCTIONS["random"](4, {"real": "0"}, seed=3)
    assert np.array_equal(r.values, random_bandlimited(4, 3, real=False).values)
    assert FUNCTIONS["dirac_delta"].resolve() == {"theta0": 0.0, "phi0": 0.0}


def test_registry_rejects_bad_params():
    with pytest.raises(InvalidInputError, match="Unknown parameter 'width'"):
        FUNCTIONS["gaussian"](8, {"width": 1})
    with pytest.raises(InvalidInputError, match="not a valid float"):
        FUNCTIONS["gaussian"](8, {"sigma": "wide"})
    with pytest.raises(InvalidInputError, match="not a valid int"):
        FUNCTIONS["harmonic"](8, {"l": "1.5"})


@pytest.mark.parametrize(
    ("name", "params", "real"),
    [
        ("gaussian", {}, True),
        ("elongated_gaussian", {"sigma_phi": "0.3"}, True),
        ("random", {}, True),
        ("random", {"real": "0"}, False),
        ("dirac_delta", {"theta0": "0.7", "phi0": "1.9"}, True),
        ("harmonic", {"l": "3", "m": "0"}, True),
        ("harmonic", {"l": "3", "m": "-2"}, False),
    ],
)
def test_registry_reality_flag(name, params, real):
    fn = FUNCTIONS[name]
    assert fn.is_real(params) is real
    assert fn(8, params, seed=4).is_real_symmetric(atol=1e-10) is real
