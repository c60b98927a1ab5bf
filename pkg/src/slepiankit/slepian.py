"""Slepian functions on the sphere.

The concentration matrix of a region R and bandlimit L is

    D[idx(l,m), idx(l',m')] = ∫_R Y_{l,m} conj(Y_{l',m'}) dω

and its eigenvectors, sorted by decreasing eigenvalue, are the harmonic
coefficients of the Slepian functions. Eigenvalues are the fraction of each
function's energy inside R.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
import scipy.linalg
from scipy.special import roots_legendre

from slepiankit import _cache
from slepiankit._parallel import ordered_map
from slepiankit.exceptions import (
    BandlimitMismatchError,
    ConcentrationThresholdError,
    ConvergenceError,
    InvalidInputError,
    NotHermitianError,
)
from slepiankit.harmonic import (
    ComplexArray,
    FloatArray,
    QuadratureGrid,
    SampledField,
    SphericalCoefficients,
    check_bandlimit,
    harmonic_matrix,
    idx,
    legendre_table,
    make_grid,
)
from slepiankit.region import (
    PolarCap,
    Region,
    RegionWeights,
    area_fraction,
    rasterize,
    region_quadrature,
)
from slepiankit.utils.log import logger

#: Eigenvalues closer than this are ordered by their dominant coefficient
TIE_TOLERANCE = 1e-12
#: First coefficient above this magnitude is made real and positive
PHASE_THRESHOLD = 1e-9
#: Residual contract ||A v - λ v|| <= RESIDUAL_TOLERANCE * ||A||
RESIDUAL_TOLERANCE = 1e-9
HERMITIAN_TOLERANCE = 1e-10
DEFAULT_LAMBDA_MIN = 0.5

# rows of the upper triangle handled by one fill task; fixed so the partition
# never depends on the worker count
_ROW_BLOCK = 16


@dataclass(frozen=True, eq=False)
class ConcentrationMatrix:
    """Concentration matrix of a region for bandlimit ``L``."""

    L: int
    entries: ComplexArray
    region: Region | None = None
    #: number of entries actually integrated (upper triangle only)
    fill_count: int = 0
    #: per-order real blocks D^{|m|} for regions with azimuthal symmetry
    blocks: Mapping[int, FloatArray] | None = None

    @property
    def size(self) -> int:
        return self.L * self.L


@dataclass(frozen=True, eq=False)
class SlepianBasis:
    """Eigenpairs of a concentration matrix, most concentrated first."""

    L: int
    region: Region | None
    eigenvalues: FloatArray
    #: ``vectors[p]`` holds the harmonic coefficients of s_p
    vectors: ComplexArray
    shannon: float
    raw_eigenvalues: FloatArray

    @property
    def size(self) -> int:
        return int(self.eigenvalues.size)

    def function(self, p: int) -> SphericalCoefficients:
        """Harmonic coefficients of the Slepian function of rank ``p``."""
        if not 0 <= p < self.size:
            msg = f"Rank {p} outside [0, {self.size})"
            raise InvalidInputError(msg)
        return SphericalCoefficients(self.L, self.vectors[p])


@dataclass(frozen=True, eq=False)
class SlepianCoefficients:
    """Coefficients f_p on the first ``P`` Slepian functions of a basis."""

    basis: SlepianBasis
    values: ComplexArray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.complex128).reshape(-1)
        if not 1 <= values.size <= self.basis.size:
            msg = f"Truncation must lie in [1, {self.basis.size}], got {values.size}"
            raise InvalidInputError(msg)
        object.__setattr__(self, "values", values)

    @property
    def P(self) -> int:
        return int(self.values.size)


class EigenPairs(NamedTuple):
    """Sorted eigenvalues and row eigenvectors of a Hermitian matrix."""

    values: FloatArray
    vectors: npt.NDArray[np.generic]


def dominant_index(vector: npt.NDArray[np.generic]) -> int:
    """Index of the largest-magnitude coefficient (first one on ties)."""
    return int(np.argmax(np.abs(vector)))


def _fix_phase(vectors: npt.NDArray[np.generic]) -> npt.NDArray[np.generic]:
    fixed = vectors.copy()
    for row in fixed:
        significant = np.flatnonzero(np.abs(row) > PHASE_THRESHOLD)
        if significant.size:
            c = row[significant[0]]
            row *= np.conj(c) / abs(c)
    return fixed


def order_eigenpairs(
    values: FloatArray,
    vectors: npt.NDArray[np.generic],
    *,
    tie_key: Callable[[npt.NDArray[np.generic]], int] = dominant_index,
) -> EigenPairs:
    """Sort descending, break near-ties deterministically and fix phases.

    A group opens at its largest eigenvalue and takes every following value
    within `TIE_TOLERANCE` of it, so the sequence never rises by more than
    the tolerance. Inside a group pairs are ordered by ``tie_key`` of the
    vector (by default the flat index of the dominant coefficient, i.e.
    lowest degree first, then lowest order).
    """
    vectors = _fix_phase(vectors)
    order = list(np.argsort(-values, kind="stable"))
    result: list[int] = []
    group: list[int] = []
    for i in order:
        if group and values[group[0]] - values[i] > TIE_TOLERANCE:
            result.extend(sorted(group, key=lambda k: tie_key(vectors[k])))
            group = []
        group.append(i)
    result.extend(sorted(group, key=lambda k: tie_key(vectors[k])))
    perm = np.asarray(result, dtype=np.int64)
    return EigenPairs(values[perm], vectors[perm])


def hermitian_eigenpairs(
    matrix: npt.ArrayLike,
    *,
    tie_key: Callable[[npt.NDArray[np.generic]], int] = dominant_index,
) -> EigenPairs:
    """Full eigendecomposition of a Hermitian (or real symmetric) matrix.

    Raises:
        NotHermitianError: if the matrix is not Hermitian within
            `HERMITIAN_TOLERANCE`.
        ConvergenceError: if LAPACK fails or a residual exceeds
            ``RESIDUAL_TOLERANCE * ||A||_2``.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        msg = f"Expected a square matrix, got shape {a.shape}"
        raise InvalidInputError(msg)
    asymmetry = float(np.max(np.abs(a - a.conj().T), initial=0.0))
    if asymmetry > HERMITIAN_TOLERANCE:
        msg = f"Matrix is not Hermitian (max |A - A^H| = {asymmetry:.3e})"
        raise NotHermitianError(msg)
    try:
        values, columns = scipy.linalg.eigh(a)
    except np.linalg.LinAlgError as e:
        msg = f"Eigensolver failed to converge: {e}"
        raise ConvergenceError(msg) from e
    norm = float(np.max(np.abs(values), initial=0.0))
    residuals = np.linalg.norm(a @ columns - columns * values, axis=0)
    worst = float(np.max(residuals, initial=0.0))
    if worst > RESIDUAL_TOLERANCE * norm:
        msg = f"Eigen residual {worst:.3e} exceeds {RESIDUAL_TOLERANCE} * ||A|| = {norm:.3e}"
        raise ConvergenceError(msg)
    return order_eigenpairs(values, columns.T, tie_key=tie_key)


def _row_blocks(n: int) -> list[tuple[int, int]]:
    return [(start, min(start + _ROW_BLOCK, n)) for start in range(0, n, _ROW_BLOCK)]


def build_matrix_general(
    region: Region,
    L: int,
    *,
    workers: int | None = None,
    exact_boundary: bool = True,
) -> ConcentrationMatrix:
    """Concentration matrix of any region by quadrature.

    Only the upper triangle is integrated, in fixed row blocks mapped over a
    thread pool; the lower triangle follows from Hermitian symmetry. The
    result is bit-identical for every worker count.

    Args:
        region: Concentration region.
        L: Bandlimit.
        workers: Fill threads; ``None`` for the configured default.
        exact_boundary: Integrate caps and boxes with a boundary-fitted Gauss
            rule. If False, use the rasterized sphere grid for every region.
    """
    L = check_bandlimit(L)
    start_time = time.perf_counter()
    if exact_boundary:
        quadrature = region_quadrature(region, L)
    else:
        quadrature = rasterize(region, make_grid(L)).as_quadrature()
    n = L * L
    weights = quadrature.weights.reshape(-1)
    nodes = np.flatnonzero(weights > 0)
    harmonics = harmonic_matrix(L, quadrature.thetas, quadrature.phis).reshape(n, -1)
    harmonics = np.ascontiguousarray(harmonics[:, nodes])
    weighted = harmonics * weights[nodes]
    conj_harmonics = np.ascontiguousarray(harmonics.conj())

    def fill(block: tuple[int, int]) -> ComplexArray:
        start, stop = block
        return weighted[start:stop] @ conj_harmonics[start:].T

    blocks = _row_blocks(n)
    parts = ordered_map(fill, blocks, workers=workers)
    entries = np.zeros((n, n), dtype=np.complex128)
    for (start, stop), part in zip(blocks, parts):
        for row in range(start, stop):
            entries[row, row:] = part[row - start, row - start :]
    lower = np.tril_indices(n, k=-1)
    entries[lower] = entries.T[lower].conj()
    diagonal = np.arange(n)
    entries[diagonal, diagonal] = entries[diagonal, diagonal].real
    logger.debug(
        "Filled %dx%d concentration matrix over %d nodes in %.3fs",
        n,
        n,
        nodes.size,
        time.perf_counter() - start_time,
    )
    return ConcentrationMatrix(
        L=L, entries=entries, region=region, fill_count=n * (n + 1) // 2
    )


def build_matrix_polar_cap(theta_max: float, L: int) -> ConcentrationMatrix:
    """Concentration matrix of a polar cap from its per-order blocks.

    A cap is symmetric about the polar axis, so only entries with equal
    orders survive and D^{-m} = D^{m}. Each block

        D^m_{l,l'} = 2π ∫_{cos θ_max}^1 P̄_l^m(x) P̄_{l'}^m(x) dx

    is a polynomial integral, done exactly by Gauss–Legendre with 2L nodes.
    """
    L = check_bandlimit(L)
    region = PolarCap(theta_max)
    a = math.cos(theta_max)
    nodes, weights = roots_legendre(2 * L)
    x = (1.0 - a) / 2.0 * nodes + (1.0 + a) / 2.0
    w = (1.0 - a) / 2.0 * weights
    table = legendre_table(L, np.clip(x, -1.0, 1.0))
    blocks: dict[int, FloatArray] = {}
    fill_count = 0
    for m in range(L):
        column = table[m:, m]
        block = 2.0 * np.pi * (column * w) @ column.T
        block = (block + block.T) / 2.0
        block.flags.writeable = False
        blocks[m] = block
        size = L - m
        fill_count += size * (size + 1) // 2
    n = L * L
    entries = np.zeros((n, n), dtype=np.complex128)
    for m in range(-(L - 1), L):
        ids = np.array([idx(l, m) for l in range(abs(m), L)])
        entries[np.ix_(ids, ids)] = blocks[abs(m)]
    return ConcentrationMatrix(
        L=L, entries=entries, region=region, fill_count=fill_count, blocks=blocks
    )


def shannon_number(L: int, region: Region) -> float:
    """N = L² times the area fraction (closed form for caps and boxes)."""
    L = check_bandlimit(L)
    return L * L * area_fraction(region, make_grid(L))


def _blockwise_eigenpairs(D: ConcentrationMatrix) -> tuple[FloatArray, ComplexArray]:
    assert D.blocks is not None
    L = D.L
    values: list[float] = []
    vectors: list[ComplexArray] = []
    for m, block in sorted(D.blocks.items()):
        pairs = hermitian_eigenpairs(block)
        for value, u in zip(pairs.values, pairs.vectors):
            for order in ((-m, m) if m else (0,)):
                vector = np.zeros(L * L, dtype=np.complex128)
                vector[[idx(l, order) for l in range(m, L)]] = u
                values.append(float(value))
                vectors.append(vector)
    return np.asarray(values), np.asarray(vectors)


def eigendecompose(D: ConcentrationMatrix) -> SlepianBasis:
    """Slepian basis of a concentration matrix.

    For S = Σ s_{l,m} Y_{l,m} the energy inside the region is s^H conj(D) s,
    so the coefficient vectors are the eigenvectors of conj(D) = D^T. The two
    coincide for the real matrices of polar caps and axisymmetric masks.

    Matrices carrying per-order blocks (polar caps) are solved block by
    block and merged. Eigenvalues are clamped to [0, 1] only after the
    residual contract has been checked; raw values stay on the basis.

    Raises:
        NotHermitianError: input is not Hermitian.
        ConvergenceError: the eigensolver failed.
    """
    start_time = time.perf_counter()
    if D.blocks is not None:
        raw, vectors = _blockwise_eigenpairs(D)
        pairs = order_eigenpairs(raw, vectors)
    else:
        pairs = hermitian_eigenpairs(D.entries.conj())
    raw_eigenvalues = np.asarray(pairs.values, dtype=np.float64)
    eigenvalues = np.clip(raw_eigenvalues, 0.0, 1.0)
    if D.region is not None:
        shannon = shannon_number(D.L, D.region)
    else:
        shannon = float(np.trace(D.entries).real)
    logger.debug(
        "Eigendecomposed %dx%d matrix in %.3fs",
        D.size,
        D.size,
        time.perf_counter() - start_time,
    )
    return SlepianBasis(
        L=D.L,
        region=D.region,
        eigenvalues=eigenvalues,
        vectors=np.asarray(pairs.vectors, dtype=np.complex128),
        shannon=shannon,
        raw_eigenvalues=raw_eigenvalues,
    )


def slepian_basis(
    region: Region,
    L: int,
    *,
    workers: int | None = None,
    use_cache: bool = True,
) -> SlepianBasis:
    """Slepian basis of a region, through the fastest available path.

    Polar caps use the per-order builder; everything else the general one.
    When ``SLEPIANKIT_CACHE_DIR`` is set, bases are read from and written to
    that directory.
    """
    L = check_bandlimit(L)
    cache_dir = _cache.get_cache_dir() if use_cache else None
    path = None
    if cache_dir is not None:
        path = _cache.cache_path(cache_dir, L, region.canonical())
        cached = _cache.load_basis(path, L)
        if cached is not None:
            eigenvalues, vectors = cached
            return SlepianBasis(
                L=L,
                region=region,
                eigenvalues=eigenvalues,
                vectors=vectors,
                shannon=shannon_number(L, region),
                raw_eigenvalues=eigenvalues.copy(),
            )
    if isinstance(region, PolarCap):
        matrix = build_matrix_polar_cap(region.theta_max, L)
    else:
        matrix = build_matrix_general(region, L, workers=workers)
    basis = eigendecompose(matrix)
    if path is not None:
        _cache.save_basis(path, basis.eigenvalues, basis.vectors)
    return basis


def _check_truncation(P: int | None, basis: SlepianBasis) -> int:
    if P is None:
        return basis.size
    if not 1 <= P <= basis.size:
        msg = f"Truncation P={P} outside [1, {basis.size}]"
        raise InvalidInputError(msg)
    return int(P)


def forward_slepian(
    f: SphericalCoefficients, basis: SlepianBasis, P: int | None = None
) -> SlepianCoefficients:
    """Project harmonic coefficients onto the first ``P`` Slepian functions."""
    if f.L != basis.L:
        msg = f"Coefficients have L={f.L} but the basis has L={basis.L}"
        raise BandlimitMismatchError(msg)
    P = _check_truncation(P, basis)
    return SlepianCoefficients(basis, basis.vectors[:P].conj() @ f.values)


def inverse_slepian(fp: SlepianCoefficients) -> SphericalCoefficients:
    """Harmonic coefficients Σ_p f_p s_p."""
    basis = fp.basis
    return SphericalCoefficients(basis.L, fp.values @ basis.vectors[: fp.P])


def slepian_functions_on_grid(
    basis: SlepianBasis, grid: QuadratureGrid, P: int | None = None
) -> ComplexArray:
    """Values of the first ``P`` Slepian functions, shape ``(P, n_θ, n_φ)``."""
    if grid.L != basis.L:
        msg = f"Grid has L={grid.L} but the basis has L={basis.L}"
        raise BandlimitMismatchError(msg)
    P = _check_truncation(P, basis)
    harmonics = harmonic_matrix(basis.L, grid.thetas, grid.phis)
    flat = basis.vectors[:P] @ harmonics.reshape(basis.L * basis.L, -1)
    return flat.reshape(P, *grid.shape)


def region_limited_forward(
    field: SampledField,
    basis: SlepianBasis,
    weights: RegionWeights,
    P: int,
    *,
    lambda_min: float = DEFAULT_LAMBDA_MIN,
) -> SlepianCoefficients:
    """Slepian coefficients estimated from samples inside the region only.

    f_p = (1/λ_p) Σ_R w field conj(S_p), which for a bandlimited field
    reproduces `forward_slepian` up to quadrature error.

    Raises:
        ConcentrationThresholdError: λ_{P-1} < ``lambda_min``, where the
            1/λ amplification is no longer under control.
    """
    if field.grid.shape != weights.grid.shape or field.grid.L != weights.grid.L:
        msg = "Field and region weights live on different grids"
        raise InvalidInputError(msg)
    P = _check_truncation(P, basis)
    if basis.eigenvalues[P - 1] < lambda_min:
        msg = (
            f"Slepian function {P - 1} has concentration "
            f"{basis.eigenvalues[P - 1]:.3e} < lambda_min={lambda_min}"
        )
        raise ConcentrationThresholdError(msg)
    inside = weights.weights > 0
    functions = slepian_functions_on_grid(basis, field.grid, P)[:, inside]
    weighted = weights.weights[inside] * field.values[inside]
    values = (functions.conj() @ weighted) / basis.eigenvalues[:P]
    return SlepianCoefficients(basis, values)
