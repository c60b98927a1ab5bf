"""Real-space output: equirectangular PNGs and CSV/JSON field records."""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Any, NamedTuple

import matplotlib.image as mpimg
import numpy as np
import numpy.typing as npt
from matplotlib.colors import LinearSegmentedColormap

from slepiankit.exceptions import InvalidInputError
from slepiankit.harmonic import FloatArray, SampledField, make_grid
from slepiankit.utils.log import logger

#: colour of the field minimum and maximum
RAMP_LOW = "#1a2a6c"
RAMP_HIGH = "#fdbb2d"
RAMP = LinearSegmentedColormap.from_list("slepiankit", [RAMP_LOW, RAMP_HIGH])

FORMATS = ("png", "csv", "json")
IMAGINARY_TOLERANCE = 1e-9


def _real_values(field: SampledField | npt.ArrayLike) -> FloatArray:
    if isinstance(field, SampledField):
        worst = float(np.max(np.abs(field.values.imag), initial=0.0))
        if worst > IMAGINARY_TOLERANCE:
            msg = f"Cannot render a complex field (max |imag| = {worst:.3e})"
            raise InvalidInputError(msg)
        return field.real_part()
    return np.asarray(field, dtype=np.float64)


def render_equirect(field: SampledField | npt.ArrayLike, path: str | os.PathLike[Any]) -> None:
    """Write the field as a PNG, one pixel per sample.

    Row 0 is the smallest colatitude, column j the longitude φ_j. Values map
    linearly from ``RAMP_LOW`` at the minimum to ``RAMP_HIGH`` at the maximum;
    a constant field is drawn in ``RAMP_LOW``.
    """
    values = _real_values(field)
    if values.ndim != 2:
        msg = f"Expected a 2-D field, got shape {values.shape}"
        raise InvalidInputError(msg)
    low, high = float(values.min()), float(values.max())
    mpimg.imsave(
        path,
        values,
        cmap=RAMP,
        vmin=low,
        vmax=high,
        format="png",
        metadata={"Software": None},
    )
    logger.debug("Rendered %dx%d image to %s", values.shape[1], values.shape[0], path)


def _format_float(value: float) -> str:
    return f"{value:.17g}"


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: Path, header: list[str]) -> list[list[str]]:
    with path.open(newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != header:
        msg = f"{path}: expected header {','.join(header)}"
        raise InvalidInputError(msg)
    return rows[1:]


def _json_payload(
    size_key: str, size: int, record: SphereFieldRecord | MeshFieldRecord
) -> dict[str, Any]:
    payload: dict[str, Any] = {size_key: size, "region": record.region}
    if record.shannon is not None:
        payload["shannon"] = record.shannon
    if record.eigenvalue is not None:
        payload["eigenvalue"] = record.eigenvalue
    payload["method"] = record.method
    payload["values"] = np.asarray(record.values, dtype=np.float64).tolist()
    return payload


class SphereFieldRecord(NamedTuple):
    """A real field on the sampling grid of bandlimit ``L`` plus run metadata."""

    L: int
    values: FloatArray
    method: str = "harmonic"
    region: str | None = None
    shannon: float | None = None
    eigenvalue: float | None = None

    def field(self) -> SampledField:
        return SampledField(make_grid(self.L), self.values)

    def dump_csv(self, path: Path) -> None:
        """One ``theta,phi,value`` row per sample, θ outer."""
        grid = make_grid(self.L)
        rows = [
            [_format_float(theta), _format_float(phi), _format_float(value)]
            for theta, row in zip(grid.thetas, self.values)
            for phi, value in zip(grid.phis, row)
        ]
        _write_csv(path, ["theta", "phi", "value"], rows)

    def dump_json(self, path: Path) -> None:
        with path.open("w") as f:
            json.dump(_json_payload("L", self.L, self), f)
            f.write("\n")

    @classmethod
    def from_csv(cls, path: Path) -> SphereFieldRecord:
        """Load values written by `dump_csv`; ``L`` follows from the row count."""
        rows = _read_csv(path, ["theta", "phi", "value"])
        L = (1 + math.isqrt(1 + 8 * len(rows))) // 4
        if L < 1 or L * (2 * L - 1) != len(rows):
            msg = f"{path}: {len(rows)} rows do not form a sampling grid"
            raise InvalidInputError(msg)
        values = np.array([float(row[2]) for row in rows]).reshape(L, 2 * L - 1)
        return cls(L=L, values=values)

    @classmethod
    def from_json(cls, path: Path) -> SphereFieldRecord:
        with path.open() as f:
            dct = json.load(f)
        dct["values"] = np.asarray(dct["values"], dtype=np.float64)
        return cls(**dct)


class MeshFieldRecord(NamedTuple):
    """A per-vertex field on a mesh with basis size ``K`` plus run metadata."""

    K: int
    values: FloatArray
    method: str = "basis"
    region: str | None = None
    shannon: float | None = None
    eigenvalue: float | None = None

    def dump_csv(self, path: Path) -> None:
        rows = [[str(v), _format_float(value)] for v, value in enumerate(self.values)]
        _write_csv(path, ["vertex", "value"], rows)

    def dump_json(self, path: Path) -> None:
        with path.open("w") as f:
            json.dump(_json_payload("K", self.K, self), f)
            f.write("\n")

    @classmethod
    def from_csv(cls, path: Path, K: int = 0) -> MeshFieldRecord:
        rows = _read_csv(path, ["vertex", "value"])
        return cls(K=K, values=np.array([float(row[1]) for row in rows]))

    @classmethod
    def from_json(cls, path: Path) -> MeshFieldRecord:
        with path.open() as f:
            dct = json.load(f)
        dct["values"] = np.asarray(dct["values"], dtype=np.float64)
        return cls(**dct)


def export_field(
    record: SphereFieldRecord | MeshFieldRecord,
    path: str | os.PathLike[Any],
    fmt: str,
) -> Path:
    """Write ``record`` to ``<path>.<fmt>`` and return the file written."""
    target = Path(f"{os.fspath(path)}.{fmt}")
    match fmt:
        case "csv":
            record.dump_csv(target)
        case "json":
            record.dump_json(target)
        case "png" if isinstance(record, SphereFieldRecord):
            render_equirect(record.values, target)
        case "png":
            msg = "PNG output is only available for sphere fields"
            raise InvalidInputError(msg)
        case _:
            msg = f"Unknown output format {fmt!r} (choose from {', '.join(FORMATS)})"
            raise InvalidInputError(msg)
    logger.info("Wrote %s", target)
    return target
