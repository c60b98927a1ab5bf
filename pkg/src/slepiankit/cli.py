import argparse
import logging
import sys
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import TypeVar

import numpy as np

from slepiankit.exceptions import (
    ConcentrationThresholdError,
    InvalidInputError,
    NumericalError,
)
from slepiankit.functions import FUNCTIONS
from slepiankit.harmonic import SphericalCoefficients, inverse_sht, make_grid
from slepiankit.mesh import (
    LaplacianKind,
    load_mesh,
    load_vertex_region,
    mesh_basis,
    mesh_laplacian,
    mesh_slepian,
    mesh_wavelet_field,
    mesh_wavelets,
)
from slepiankit.plotting import (
    FORMATS,
    IMAGINARY_TOLERANCE,
    MeshFieldRecord,
    SphereFieldRecord,
    export_field,
)
from slepiankit.region import Region, parse_region
from slepiankit.slepian import (
    DEFAULT_LAMBDA_MIN,
    SlepianBasis,
    SlepianCoefficients,
    forward_slepian,
    inverse_slepian,
    slepian_basis,
)
from slepiankit.utils.log import logger, set_stream_level
from slepiankit.wavelets import (
    WaveletCoefficients,
    analysis,
    slepian_tiling,
    slepian_wavelet,
    synthesis,
)

SPHERE_METHODS = ("harmonic", "slepian", "wavelet")
MESH_METHODS = ("basis", "slepian", "wavelet")
#: sources computed from the region's Slepian basis rather than FUNCTIONS
SLEPIAN_SOURCES = ("slepian", "slepian_wavelet")

_Job = TypeVar("_Job")


@dataclass(frozen=True)
class PlotJob:
    """Everything one `sphere` invocation computes and writes."""

    source: str
    L: int
    output: Path
    formats: tuple[str, ...] = ("png",)
    params: Mapping[str, str] = field(default_factory=dict)
    seed: int = 0
    region: Region | None = None
    #: region as the user wrote it, reported in the JSON output
    region_text: str | None = None
    method: str = "harmonic"
    rank: int = 0
    #: wavelet scale j; None selects the scaling function
    scale: int | None = None
    B: float = 2.0
    J_min: int = 0
    lambda_min: float = DEFAULT_LAMBDA_MIN
    workers: int | None = None

    def __post_init__(self) -> None:
        if not self.formats or any(fmt not in FORMATS for fmt in self.formats):
            msg = f"Formats must be a non-empty subset of {', '.join(FORMATS)}"
            raise InvalidInputError(msg)
        if self.method not in SPHERE_METHODS:
            msg = f"Unknown method {self.method!r}"
            raise InvalidInputError(msg)
        if self.region is None and (
            self.method != "harmonic" or self.source in SLEPIAN_SOURCES
        ):
            msg = "Slepian and wavelet outputs need a region"
            raise InvalidInputError(msg)


@dataclass(frozen=True)
class MeshJob:
    """Everything one `mesh` invocation computes and writes."""

    mesh_path: Path
    K: int
    output: Path
    formats: tuple[str, ...] = ("csv",)
    region_path: Path | None = None
    method: str = "basis"
    rank: int = 0
    scale: int | None = None
    B: float = 2.0
    J_min: int = 0
    laplacian: LaplacianKind = LaplacianKind.COTANGENT
    workers: int | None = None

    def __post_init__(self) -> None:
        if not self.formats or any(fmt not in ("csv", "json") for fmt in self.formats):
            msg = "Mesh formats must be a non-empty subset of csv, json"
            raise InvalidInputError(msg)
        if self.method not in MESH_METHODS:
            msg = f"Unknown method {self.method!r}"
            raise InvalidInputError(msg)
        if self.method != "basis" and self.region_path is None:
            msg = "Slepian and wavelet outputs need a region"
            raise InvalidInputError(msg)


def _format_list(allowed: tuple[str, ...]) -> Callable[[str], tuple[str, ...]]:
    def parse(text: str) -> tuple[str, ...]:
        formats = tuple(dict.fromkeys(f.strip() for f in text.split(",") if f.strip()))
        unknown = [f for f in formats if f not in allowed]
        if not formats or unknown:
            msg = f"formats must be a comma separated subset of {','.join(allowed)}"
            raise argparse.ArgumentTypeError(msg)
        return formats

    return parse


def _key_value(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        msg = f"expected key=value, got {text!r}"
        raise argparse.ArgumentTypeError(msg)
    return key, value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        msg = f"expected a positive integer, got {text!r}"
        raise argparse.ArgumentTypeError(msg) from None
    if value < 1:
        msg = f"expected a positive integer, got {value}"
        raise argparse.ArgumentTypeError(msg)
    return value


def _add_common_cli_args(parser: argparse.ArgumentParser) -> None:
    """Add arguments shared by both command line interfaces"""
    parser.add_argument(
        "--method",
        default=None,
        help="What to compute from the source (see choices per command).",
    )
    parser.add_argument(
        "--rank",
        type=int,
        default=0,
        help="Rank p of the Slepian (or basis) function to plot. Defaults to 0.",
    )
    scale = parser.add_mutually_exclusive_group()
    scale.add_argument(
        "--scale",
        type=int,
        default=None,
        help="Wavelet scale j to keep. Defaults to the scaling function.",
    )
    scale.add_argument(
        "--scaling",
        action="store_true",
        help="Keep the scaling function (the default).",
    )
    parser.add_argument(
        "--B",
        dest="B",
        type=float,
        default=2.0,
        help="Wavelet dilation parameter. Defaults to 2.",
    )
    parser.add_argument(
        "--Jmin",
        dest="J_min",
        type=int,
        default=0,
        help="Lowest wavelet scale. Defaults to 0.",
    )
    parser.add_argument(
        "--workers",
        type=_positive_int,
        default=None,
        help="Worker threads for matrix assembly. Defaults to SLEPIANKIT_WORKERS or the CPU count.",
    )
    parser.add_argument(
        "-o",
        "--output",
        type=Path,
        required=True,
        help="Output path without extension; one file per format is written.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug output")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only")


def get_sphere_cli() -> argparse.ArgumentParser:
    """Get the `sphere` command line interface"""
    parser = argparse.ArgumentParser(
        prog="sphere",
        description="Plot functions, Slepian functions and Slepian wavelets on the sphere.",
    )
    parser.add_argument(
        "function",
        help=(
            f"Function to plot: one of {', '.join(sorted(FUNCTIONS))}, "
            f"{', '.join(SLEPIAN_SOURCES)}, or a .npy file of L**2 coefficients."
        ),
    )
    parser.add_argument(
        "-L", dest="L", type=_positive_int, required=True, help="Bandlimit"
    )
    parser.add_argument(
        "--region",
        default=None,
        help="Region: polar-cap:<deg>, latlon:<tmin>,<tmax>,<pmin>,<pmax> or mask:<path>.",
    )
    parser.add_argument(
        "--param",
        type=_key_value,
        nargs="+",
        action="extend",
        default=[],
        help="Function parameters as key=value pairs, e.g. sigma=0.1.",
    )
    parser.add_argument("--seed", type=int, default=0, help="Random seed. Defaults to 0.")
    parser.add_argument(
        "--lambda-min",
        type=float,
        default=DEFAULT_LAMBDA_MIN,
        help="Smallest concentration of a retained Slepian function. Defaults to 0.5.",
    )
    parser.add_argument(
        "--format",
        dest="formats",
        type=_format_list(FORMATS),
        default=("png",),
        help="Comma separated output formats out of png,csv,json. Defaults to png.",
    )
    _add_common_cli_args(parser)
    return parser


def get_mesh_cli() -> argparse.ArgumentParser:
    """Get the `mesh` command line interface"""
    parser = argparse.ArgumentParser(
        prog="mesh",
        description="Plot Laplacian eigenfunctions, Slepian functions and wavelets on a mesh.",
    )
    parser.add_argument("meshfile", type=Path, help="Triangle mesh in OFF (or OBJ) format")
    parser.add_argument(
        "--basis",
        dest="K",
        type=_positive_int,
        required=True,
        help="Number of Laplacian eigenfunctions in the basis.",
    )
    parser.add_argument(
        "--region",
        type=Path,
        default=None,
        help="File with one vertex index per line.",
    )
    parser.add_argument(
        "--laplacian",
        choices=[kind.value for kind in LaplacianKind],
        default=LaplacianKind.COTANGENT.value,
        help="Laplacian discretisation. Defaults to cotangent.",
    )
    parser.add_argument(
        "--format",
        dest="formats",
        type=_format_list(("csv", "json")),
        default=("csv",),
        help="Comma separated output formats out of csv,json. Defaults to csv.",
    )
    _add_common_cli_args(parser)
    return parser


def _configure_verbosity(args: argparse.Namespace) -> None:
    if args.verbose:
        set_stream_level(logging.DEBUG)
    elif args.quiet:
        set_stream_level(logging.WARNING)
    else:
        set_stream_level(logging.INFO)


def _sphere_job(parser: argparse.ArgumentParser, args: argparse.Namespace) -> PlotJob:
    """Check cross-argument constraints and build the job"""
    method = args.method or "harmonic"
    if method not in SPHERE_METHODS:
        parser.error(f"argument --method: choose from {', '.join(SPHERE_METHODS)}")
    region = None
    if args.region is not None:
        try:
            region = parse_region(args.region)
        except (InvalidInputError, OSError) as e:
            parser.error(f"argument --region: {e}")
    elif method != "harmonic":
        parser.error(f"argument --region: required for --method {method}")
    elif args.function in SLEPIAN_SOURCES:
        parser.error(f"argument --region: required for {args.function}")
    source = args.function
    if source not in FUNCTIONS and source not in SLEPIAN_SOURCES and not source.endswith(".npy"):
        parser.error(f"argument function: unknown function {source!r}")
    return PlotJob(
        source=source,
        L=args.L,
        output=args.output,
        formats=args.formats,
        params=dict(args.param),
        seed=args.seed,
        region=region,
        region_text=args.region,
        method=method,
        rank=args.rank,
        scale=args.scale,
        B=args.B,
        J_min=args.J_min,
        lambda_min=args.lambda_min,
        workers=args.workers,
    )


def _mesh_job(parser: argparse.ArgumentParser, args: argparse.Namespace) -> MeshJob:
    """Check cross-argument constraints and build the job"""
    method = args.method or "basis"
    if method not in MESH_METHODS:
        parser.error(f"argument --method: choose from {', '.join(MESH_METHODS)}")
    if method != "basis" and args.region is None:
        parser.error(f"argument --region: required for --method {method}")
    return MeshJob(
        mesh_path=args.meshfile,
        K=args.K,
        output=args.output,
        formats=args.formats,
        region_path=args.region,
        method=method,
        rank=args.rank,
        scale=args.scale,
        B=args.B,
        J_min=args.J_min,
        laplacian=LaplacianKind(args.laplacian),
        workers=args.workers,
    )


def _load_coefficients(path: Path, L: int) -> SphericalCoefficients:
    if not path.is_file():
        msg = f"Coefficient file {path} does not exist"
        raise FileNotFoundError(msg)
    try:
        values = np.load(path, allow_pickle=False)
    except (ValueError, OSError, EOFError) as e:
        msg = f"Could not read coefficients from {path}: {e}"
        raise InvalidInputError(msg) from e
    if not isinstance(values, np.ndarray) or not np.issubdtype(values.dtype, np.number):
        msg = f"{path} does not hold a numeric .npy array"
        raise InvalidInputError(msg)
    return SphericalCoefficients(L, values)



def _keep_one_scale(w: WaveletCoefficients, scale: int | None) -> WaveletCoefficients:
    """Zero every part of ``w`` except one wavelet scale (or the scaling part)"""
    wavelets = np.zeros_like(w.wavelets)
    if scale is None:
        return WaveletCoefficients(w.params, w.scaling, wavelets)
    if not w.params.J_min <= scale <= w.params.J_max:
        msg = f"Scale {scale} outside [{w.params.J_min}, {w.params.J_max}]"
        raise InvalidInputError(msg)
    wavelets[scale - w.params.J_min] = w.wavelets[scale - w.params.J_min]
    return WaveletCoefficients(w.params, np.zeros_like(w.scaling), wavelets)


def _retained_rank_count(basis: SlepianBasis, lambda_min: float) -> int:
    P = int(np.sum(basis.eigenvalues >= lambda_min))
    if P == 0:
        msg = f"No Slepian function reaches lambda_min={lambda_min} (largest {basis.eigenvalues[0]:.3e})"
        raise ConcentrationThresholdError(msg)
    logger.info(
        "Retaining %d of %d Slepian functions with concentration >= %s",
        P,
        basis.size,
        lambda_min,
    )
    return P


def _sphere_source(
    job: PlotJob, basis: SlepianBasis | None
) -> tuple[SphericalCoefficients, float | None]:
    """Harmonic coefficients of the requested source and its eigenvalue, if any"""
    if job.source in SLEPIAN_SOURCES:
        assert basis is not None
        if job.source == "slepian":
            eigenvalue = float(basis.eigenvalues[job.rank]) if 0 <= job.rank < basis.size else None
            return basis.function(job.rank), eigenvalue
        tiling = slepian_tiling(basis, B=job.B, J_min=job.J_min)
        return slepian_wavelet(basis, tiling, job.scale), None
    if job.source in FUNCTIONS:
        return FUNCTIONS[job.source](job.L, job.params, job.seed), None
    return _load_coefficients(Path(job.source), job.L), None


def run_sphere_job(job: PlotJob) -> list[Path]:
    """Compute the field of a `PlotJob` and write every requested format"""
    basis = None
    if job.region is not None:
        basis = slepian_basis(job.region, job.L, workers=job.workers)
        logger.info("Shannon number N = %.6g", basis.shannon)
    coefficients, eigenvalue = _sphere_source(job, basis)
    match job.method:
        case "harmonic":
            result = coefficients
        case "slepian":
            assert basis is not None
            P = _retained_rank_count(basis, job.lambda_min)
            result = inverse_slepian(forward_slepian(coefficients, basis, P))
        case "wavelet":
            assert basis is not None
            tiling = slepian_tiling(basis, B=job.B, J_min=job.J_min)
            logger.info(
                "Tiling %d Slepian ranks with scales %d..%d",
                tiling.params.T,
                tiling.params.J_min,
                tiling.params.J_max,
            )
            line = forward_slepian(coefficients, basis, tiling.params.T)
            kept = _keep_one_scale(analysis(line, tiling), job.scale)
            result = inverse_slepian(SlepianCoefficients(basis, synthesis(kept, tiling)))
        case _:
            msg = f"Unknown method {job.method!r}"
            raise InvalidInputError(msg)
    field = inverse_sht(result, make_grid(job.L))
    worst = float(np.max(np.abs(field.values.imag), initial=0.0))
    if worst > IMAGINARY_TOLERANCE:
        logger.warning("Field is complex (max |imag| = %.3e); writing its real part", worst)
    record = SphereFieldRecord(
        L=job.L,
        values=field.real_part(),
        method=job.method,
        region=job.region_text,
        shannon=None if basis is None else float(basis.shannon),
        eigenvalue=eigenvalue,
    )
    job.output.parent.mkdir(parents=True, exist_ok=True)
    return [export_field(record, job.output, fmt) for fmt in job.formats]


def run_mesh_job(job: MeshJob) -> list[Path]:
    """Compute the per-vertex field of a `MeshJob` and write every requested format"""
    mesh = load_mesh(job.mesh_path)
    laplacian = mesh_laplacian(mesh, job.laplacian, workers=job.workers)
    basis = mesh_basis(laplacian, mesh.vertex_weights, job.K, mesh=mesh)
    shannon = None
    if job.method == "basis":
        if not 0 <= job.rank < basis.K:
            msg = f"Rank {job.rank} outside [0, {basis.K})"
            raise InvalidInputError(msg)
        values = basis.vectors[job.rank]
        eigenvalue: float | None = float(basis.eigenvalues[job.rank])
    else:
        assert job.region_path is not None
        region = load_vertex_region(job.region_path, mesh.n_vertices)
        msb = mesh_slepian(basis, region)
        shannon = float(msb.shannon)
        logger.info("Shannon number N = %.6g", shannon)
        if job.method == "slepian":
            values = msb.vertex_field(job.rank)
            eigenvalue = float(msb.eigenvalues[job.rank])
        else:
            tiling = mesh_wavelets(msb, B=job.B, J_min=job.J_min)
            values = mesh_wavelet_field(msb, tiling, job.scale)
            eigenvalue = None
    record = MeshFieldRecord(
        K=job.K,
        values=np.asarray(values, dtype=np.float64),
        method=job.method,
        region=None if job.region_path is None else str(job.region_path),
        shannon=shannon,
        eigenvalue=eigenvalue,
    )
    job.output.parent.mkdir(parents=True, exist_ok=True)
    return [export_field(record, job.output, fmt) for fmt in job.formats]


def _run(
    argv: list[str] | None,
    parser: argparse.ArgumentParser,
    build_job: Callable[[argparse.ArgumentParser, argparse.Namespace], _Job],
    run_job: Callable[[_Job], list[Path]],
) -> int:
    """Parse, run and map failures onto the exit-code contract"""
    try:
        args = parser.parse_args(argv)
        _configure_verbosity(args)
        job = build_job(parser, args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except InvalidInputError as e:
        logger.error("%s", e)
        return 2
    try:
        run_job(job)
    except NumericalError as e:
        logger.error("Numerical failure: %s", e)
        return 1
    except (InvalidInputError, OSError) as e:
        logger.error("%s", e)
        return 2
    return 0


def run_sphere_cli(argv: list[str] | None = None) -> int:
    """Run the `sphere` command line interface and return its exit code"""
    return _run(argv, get_sphere_cli(), _sphere_job, run_sphere_job)


def run_mesh_cli(argv: list[str] | None = None) -> int:
    """Run the `mesh` command line interface and return its exit code"""
    return _run(argv, get_mesh_cli(), _mesh_job, run_mesh_job)


def sphere_main() -> None:
    """Entry point of the `sphere` script"""
    sys.exit(run_sphere_cli())


def mesh_main() -> None:
    """Entry point of the `mesh` script"""
    sys.exit(run_mesh_cli())


if __name__ == "__main__":
    sphere_main()
