"""Slepian functions on triangle meshes.

The eigenvectors of a mesh Laplacian play the role of spherical harmonics:
``K`` of them, orthonormal under the lumped-area inner product
⟨u, v⟩ = Σ_v w_v u(v) v(v), span the "bandlimited" functions. Concentrating
those on a set of vertices gives mesh Slepian functions, and the rank line of
those is tiled exactly as on the sphere.
"""

from __future__ import annotations

import enum
import os
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy.linalg
from scipy import sparse

from slepiankit._parallel import ordered_map
from slepiankit.exceptions import InvalidInputError, MeshFormatError, RegionParseError
from slepiankit.harmonic import FloatArray
from slepiankit.slepian import hermitian_eigenpairs
from slepiankit.utils.log import logger
from slepiankit.utils.templates import render_template
from slepiankit.wavelets import (
    TilingFunctions,
    TilingParams,
    build_tiling,
    slepian_line_length,
)

IntArray = npt.NDArray[np.int64]

MIN_FACE_AREA = 1e-12
# faces per assembly task; fixed so the merge order never depends on workers
_FACE_CHUNK = 512


class LaplacianKind(enum.Enum):
    """Discretisation of the Laplace operator on a mesh."""

    COMBINATORIAL = "combinatorial"
    COTANGENT = "cotangent"


def face_areas(vertices: FloatArray, faces: IntArray) -> FloatArray:
    """Area of every triangle."""
    if faces.size == 0:
        return np.zeros(0)
    a, b, c = (vertices[faces[:, k]] for k in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh with lumped (one third of incident area) vertex weights."""

    vertices: FloatArray
    faces: IntArray
    vertex_weights: FloatArray

    @classmethod
    def from_arrays(
        cls, vertices: npt.ArrayLike, faces: npt.ArrayLike, *, strict: bool = True
    ) -> Mesh:
        """Validate geometry and compute the vertex weights.

        Args:
            vertices: ``(n, 3)`` coordinates.
            faces: ``(m, 3)`` vertex indices.
            strict: Refuse vertices without any incident face.
        """
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        n = vertices.shape[0]
        if faces.size and (faces.min() < 0 or faces.max() >= n):
            msg = f"Face index out of range for {n} vertices"
            raise MeshFormatError(msg)
        areas = face_areas(vertices, faces)
        degenerate = np.flatnonzero(areas <= MIN_FACE_AREA)
        if degenerate.size:
            msg = f"Face {int(degenerate[0])} is degenerate (area {areas[degenerate[0]]:.3e})"
            raise MeshFormatError(msg)
        weights = np.bincount(
            faces.reshape(-1), weights=np.repeat(areas / 3.0, 3), minlength=n
        )
        if strict and np.any(weights <= 0):
            lonely = int(np.flatnonzero(weights <= 0)[0])
            msg = f"Vertex {lonely} has no incident face (strict mode)"
            raise MeshFormatError(msg)
        return cls(vertices=vertices, faces=faces, vertex_weights=weights)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    @property
    def total_area(self) -> float:
        return float(np.sum(self.vertex_weights))


def _content_lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if content:
            yield number, content.split()


def _parse_numbers(tokens: list[str], kind: type, line: int) -> list[Any]:
    try:
        return [kind(token) for token in tokens]
    except ValueError:
        msg = f"could not parse {' '.join(tokens)!r}"
        raise MeshFormatError(msg, line=line) from None


def _read_off(text: str) -> tuple[FloatArray, IntArray]:
    lines = list(_content_lines(text))
    if not lines or lines[0][1][0] != "OFF":
        msg = "file must start with 'OFF'"
        raise MeshFormatError(msg, line=lines[0][0] if lines else 1)
    header_rest = lines[0][1][1:]
    body = lines[1:]
    if header_rest:
        counts_line, counts = lines[0][0], header_rest
    else:
        if not body:
            msg = "missing counts line"
            raise MeshFormatError(msg, line=lines[0][0])
        (counts_line, counts), body = body[0], body[1:]
    numbers = _parse_numbers(counts, int, counts_line)
    if len(numbers) < 2:
        msg = "counts line needs vertex and face counts"
        raise MeshFormatError(msg, line=counts_line)
    n_vertices, n_faces = numbers[0], numbers[1]
    if len(body) < n_vertices + n_faces:
        msg = f"expected {n_vertices} vertices and {n_faces} faces, file ends early"
        raise MeshFormatError(msg, line=body[-1][0] if body else counts_line)
    vertices = np.zeros((n_vertices, 3))
    for i, (line, tokens) in enumerate(body[:n_vertices]):
        coords = _parse_numbers(tokens, float, line)
        if len(coords) < 3:
            msg = "vertex needs 3 coordinates"
            raise MeshFormatError(msg, line=line)
        vertices[i] = coords[:3]
    faces = np.zeros((n_faces, 3), dtype=np.int64)
    for i, (line, tokens) in enumerate(body[n_vertices : n_vertices + n_faces]):
        entries = _parse_numbers(tokens, int, line)
        if entries[0] != 3 or len(entries) < 4:
            msg = f"only triangular faces are supported, got {entries[0]} vertices"
            raise MeshFormatError(msg, line=line)
        if min(entries[1:4]) < 0 or max(entries[1:4]) >= n_vertices:
            msg = f"face index out of range for {n_vertices} vertices"
            raise MeshFormatError(msg, line=line)
        faces[i] = entries[1:4]
    return vertices, faces


def _obj_index(token: str, n_vertices: int, line: int) -> int:
    index = _parse_numbers([token.split("/", 1)[0]], int, line)[0]
    resolved = index - 1 if index > 0 else n_vertices + index
    if not 0 <= resolved < n_vertices:
        msg = f"face index {index} out of range for {n_vertices} vertices"
        raise MeshFormatError(msg, line=line)
    return int(resolved)


def _read_obj(text: str) -> tuple[FloatArray, IntArray]:
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    for line, tokens in _content_lines(text):
        match tokens[0]:
            case "v":
                coords = _parse_numbers(tokens[1:4], float, line)
                if len(coords) < 3:
                    msg = "vertex needs 3 coordinates"
                    raise MeshFormatError(msg, line=line)
                vertices.append(coords)
            case "f":
                if len(tokens) != 4:
                    msg = f"only triangular faces are supported, got {len(tokens) - 1} vertices"
                    raise MeshFormatError(msg, line=line)
                faces.append([_obj_index(t, len(vertices), line) for t in tokens[1:]])
            case _:
                pass
    return np.asarray(vertices).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(path: str | os.PathLike[Any], *, strict: bool = True) -> Mesh:
    """Load an OFF (or OBJ) triangle mesh.

    Raises:
        FileNotFoundError: the file does not exist.
        MeshFormatError: malformed content, with the offending line number.
    """
    path = Path(path)
    if not path.is_file():
        msg = f"Mesh file {path} does not exist"
        raise FileNotFoundError(msg)
    text = path.read_text()
    match path.suffix.lower():
        case ".off":
            vertices, faces = _read_off(text)
        case ".obj":
            vertices, faces = _read_obj(text)
        case _:
            msg = f"Unsupported mesh format {path.suffix!r} (use .off or .obj)"
            raise MeshFormatError(msg)
    mesh = Mesh.from_arrays(vertices, faces, strict=strict)
    logger.debug(
        "Loaded mesh %s with %d vertices and %d faces", path, mesh.n_vertices, mesh.n_faces
    )
    return mesh


def write_off(mesh: Mesh, path: str | os.PathLike[Any]) -> None:
    """Write a mesh in OFF format."""
    text = render_template(
        "mesh.off.j2",
        n_vertices=mesh.n_vertices,
        n_faces=mesh.n_faces,
        vertices=[" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices],
        faces=[" ".join(str(int(i)) for i in f) for f in mesh.faces],
    )
    Path(path).write_text(text)


def icosphere(subdivisions: int = 2) -> Mesh:
    """Unit icosahedron refined by midpoint subdivision.

    Vertex counts are 12, 42, 162, 642, ... for 0, 1, 2, 3, ... subdivisions.
    """
    if subdivisions < 0:
        msg = f"Subdivisions must be non-negative, got {subdivisions}"
        raise InvalidInputError(msg)
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = [
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ]  # fmt: skip
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]  # fmt: skip
    points = [np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for v in vertices]
    for _ in range(subdivisions):
        midpoints: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (min(i, j), max(i, j))
            if key not in midpoints:
                mid = points[i] + points[j]
                points.append(mid / np.linalg.norm(mid))
                midpoints[key] = len(points) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = refined
    return Mesh.from_arrays(np.asarray(points), np.asarray(faces))


def graph_laplacian(n_vertices: int, edges: npt.ArrayLike) -> sparse.csr_matrix:
    """Combinatorial Laplacian D - A of an undirected graph."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n_vertices):
        msg = f"Edge index out of range for {n_vertices} vertices"
        raise InvalidInputError(msg)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adjacency = sparse.csr_matrix(
        (np.ones(rows.size), (rows, cols)), shape=(n_vertices, n_vertices)
    )
    # repeated edges (shared by two faces) count once
    adjacency.data[:] = 1.0
    adjacency.setdiag(0.0)
    adjacency.eliminate_zeros()
    degree = np.asarray(adjacency.sum(axis=1)).reshape(-1)
    return (sparse.diags(degree) - adjacency).tocsr()


def _cotangent_chunk(
    vertices: FloatArray, faces: IntArray
) -> tuple[IntArray, IntArray, FloatArray]:
    rows, cols, values = [], [], []
    for k in range(3):
        i, j, opposite = faces[:, (k + 1) % 3], faces[:, (k + 2) % 3], faces[:, k]
        u = vertices[i] - vertices[opposite]
        v = vertices[j] - vertices[opposite]
        cot = np.einsum("ij,ij->i", u, v) / np.linalg.norm(np.cross(u, v), axis=1)
        rows += [i, j]
        cols += [j, i]
        values += [-cot / 2.0, -cot / 2.0]
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(values)


def mesh_laplacian(
    mesh: Mesh,
    kind: LaplacianKind = LaplacianKind.COTANGENT,
    *,
    workers: int | None = None,
) -> sparse.csr_matrix:
    """Symmetric positive semi-definite Laplacian with zero row sums.

    ``COTANGENT`` uses the half-cotangent edge weights, assembled over fixed
    face chunks on a thread pool and merged in chunk order.
    """
    n = mesh.n_vertices
    match kind:
        case LaplacianKind.COMBINATORIAL:
            edges = np.concatenate(
                [mesh.faces[:, [0, 1]], mesh.faces[:, [1, 2]], mesh.faces[:, [2, 0]]]
            )
            return graph_laplacian(n, edges)
        case LaplacianKind.COTANGENT:
            chunks = [
                mesh.faces[start : start + _FACE_CHUNK]
                for start in range(0, mesh.n_faces, _FACE_CHUNK)
            ]
            parts = ordered_map(
                lambda chunk: _cotangent_chunk(mesh.vertices, chunk),
                chunks,
                workers=workers,
            )
            if parts:
                rows = np.concatenate([p[0] for p in parts])
                cols = np.concatenate([p[1] for p in parts])
                values = np.concatenate([p[2] for p in parts])
            else:
                rows = cols = np.zeros(0, dtype=np.int64)
                values = np.zeros(0)
            off_diagonal = sparse.coo_matrix((values, (rows, cols)), shape=(n, n)).tocsr()
            diagonal = -np.asarray(off_diagonal.sum(axis=1)).reshape(-1)
            return (off_diagonal + sparse.diags(diagonal)).tocsr()
        case _:
            msg = f"Unknown Laplacian kind {kind!r}"
            raise InvalidInputError(msg)


@dataclass(frozen=True, eq=False)
class MeshBasis:
    """Lowest ``K`` Laplacian eigenpairs, weighted-orthonormal vectors."""

    weights: FloatArray
    eigenvalues: FloatArray
    #: ``vectors[k]`` is eigenvector k over the vertices
    vectors: FloatArray
    mesh: Mesh | None = None

    @property
    def K(self) -> int:
        return int(self.eigenvalues.size)


def mesh_basis(
    laplacian: sparse.spmatrix | npt.ArrayLike,
    weights: npt.ArrayLike,
    K: int,
    *,
    strict: bool = True,
    mesh: Mesh | None = None,
) -> MeshBasis:
    """Solve L u = μ W u for the ``K`` smallest μ.

    The generalised problem is reduced to the symmetric matrix
    W^{-1/2} L W^{-1/2} and solved densely.

    Args:
        laplacian: Symmetric Laplacian.
        weights: Lumped vertex weights (the diagonal of W).
        K: Basis size.
        strict: Refuse non-positive weights. Otherwise vertices with zero
            weight are dropped from the problem and vectors vanish there.
        mesh: Mesh the Laplacian came from, kept for reference.
    """
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    dense = laplacian.toarray() if sparse.issparse(laplacian) else np.asarray(laplacian)
    n = weights.size
    if dense.shape != (n, n):
        msg = f"Laplacian of shape {dense.shape} does not match {n} weights"
        raise InvalidInputError(msg)
    active = weights > 0
    if strict and not np.all(active):
        msg = f"Vertex {int(np.flatnonzero(~active)[0])} has non-positive weight"
        raise InvalidInputError(msg)
    n_active = int(active.sum())
    if not 1 <= K <= n_active:
        msg = f"Basis size K={K} outside [1, {n_active}]"
        raise InvalidInputError(msg)
    scale = 1.0 / np.sqrt(weights[active])
    reduced = scale[:, None] * dense[np.ix_(active, active)] * scale[None, :]
    reduced = (reduced + reduced.T) / 2.0
    eigenvalues, columns = scipy.linalg.eigh(reduced, subset_by_index=[0, K - 1])
    vectors = np.zeros((K, n))
    vectors[:, active] = (columns * scale[:, None]).T
    for row in vectors:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    logger.debug("Mesh basis of size %d on %d vertices", K, n)
    return MeshBasis(weights=weights, eigenvalues=eigenvalues, vectors=vectors, mesh=mesh)


@dataclass(frozen=True, eq=False)
class MeshSlepianBasis:
    """Mesh Slepian functions of a vertex region, most concentrated first."""

    basis: MeshBasis
    region: IntArray
    eigenvalues: FloatArray
    #: ``vectors[p]`` holds the mesh-basis coefficients of S_p
    vectors: FloatArray
    #: N = trace(C), the sum of the concentration eigenvalues
    shannon: float
    raw_eigenvalues: FloatArray
    #: K times the region weight fraction; matches ``shannon`` for the whole
    #: mesh, or for a full basis over uniform weights
    area_shannon: float

    @property
    def size(self) -> int:
        return int(self.eigenvalues.size)

    def vertex_field(self, p: int) -> FloatArray:
        """Values of the Slepian function of rank ``p`` on the vertices."""
        if not 0 <= p < self.size:
            msg = f"Rank {p} outside [0, {self.size})"
            raise InvalidInputError(msg)
        return self.vectors[p] @ self.basis.vectors


def _check_region(region: npt.ArrayLike, n_vertices: int) -> IntArray:
    vertices = np.unique(np.asarray(region, dtype=np.int64).reshape(-1))
    if vertices.size == 0:
        msg = "Mesh region must contain at least one vertex"
        raise InvalidInputError(msg)
    if vertices[0] < 0 or vertices[-1] >= n_vertices:
        msg = f"Region vertex out of range for {n_vertices} vertices"
        raise InvalidInputError(msg)
    return vertices


def mesh_slepian(basis: MeshBasis, region: npt.ArrayLike) -> MeshSlepianBasis:
    """Concentrate the mesh basis on a set of vertices.

    C_{k,k'} = Σ_{v∈R} w_v u_k(v) u_{k'}(v), eigendecomposed under the same
    ordering, sign and residual rules as the spherical basis. The Shannon
    number is trace(C); the area estimate K · Σ_R w / Σ w is kept alongside
    as ``area_shannon``.
    """
    vertices = _check_region(region, basis.weights.size)
    restricted = basis.vectors[:, vertices]
    concentration = (restricted * basis.weights[vertices]) @ restricted.T
    concentration = (concentration + concentration.T) / 2.0
    pairs = hermitian_eigenpairs(concentration)
    raw = np.asarray(pairs.values, dtype=np.float64)
    fraction = float(np.sum(basis.weights[vertices]) / np.sum(basis.weights))
    return MeshSlepianBasis(
        basis=basis,
        region=vertices,
        eigenvalues=np.clip(raw, 0.0, 1.0),
        vectors=np.asarray(pairs.vectors, dtype=np.float64),
        shannon=float(np.trace(concentration)),
        raw_eigenvalues=raw,
        area_shannon=basis.K * fraction,
    )


def mesh_forward_slepian(
    values: npt.ArrayLike, msb: MeshSlepianBasis, P: int | None = None
) -> FloatArray:
    """Coefficients f_p = Σ_v w_v f(v) S_p(v) of a per-vertex field."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    basis = msb.basis
    if values.size != basis.weights.size:
        msg = f"Field has {values.size} values for {basis.weights.size} vertices"
        raise InvalidInputError(msg)
    P = msb.size if P is None else P
    if not 1 <= P <= msb.size:
        msg = f"Truncation P={P} outside [1, {msb.size}]"
        raise InvalidInputError(msg)
    harmonic = basis.vectors @ (basis.weights * values)
    return msb.vectors[:P] @ harmonic


def mesh_inverse_slepian(coefficients: npt.ArrayLike, msb: MeshSlepianBasis) -> FloatArray:
    """Per-vertex field Σ_p f_p S_p."""
    coefficients = np.asarray(coefficients, dtype=np.float64).reshape(-1)
    if not 1 <= coefficients.size <= msb.size:
        msg = f"Expected between 1 and {msb.size} coefficients, got {coefficients.size}"
        raise InvalidInputError(msg)
    return coefficients @ msb.vectors[: coefficients.size] @ msb.basis.vectors


def mesh_wavelets(msb: MeshSlepianBasis, B: float = 2.0, J_min: int = 0) -> TilingFunctions:
    """Tiling of the mesh Slepian rank line of length ceil(N)."""
    T = slepian_line_length(msb.shannon, msb.size)
    return build_tiling(TilingParams(B=B, J_min=J_min, T=T))


def mesh_wavelet_field(
    msb: MeshSlepianBasis, tiling: TilingFunctions, j: int | None = None
) -> FloatArray:
    """Per-vertex values of Σ_p κ_j(p) S_p (η instead of κ_j if ``j`` is None)."""
    T = tiling.params.T
    if T > msb.size:
        msg = f"Tiling length {T} exceeds the basis size {msb.size}"
        raise InvalidInputError(msg)
    window = tiling.eta if j is None else tiling.kappa(j)
    return window @ msb.vectors[:T] @ msb.basis.vectors


def load_vertex_region(path: str | os.PathLike[Any], n_vertices: int) -> IntArray:
    """Read a vertex region file: one vertex index per line."""
    path = Path(path)
    if not path.is_file():
        msg = f"Region file {path} does not exist"
        raise FileNotFoundError(msg)
    indices = []
    for line, tokens in _content_lines(path.read_text()):
        try:
            index = int(tokens[0])
        except ValueError:
            msg = f"{path}: line {line}: could not parse vertex index {tokens[0]!r}"
            raise RegionParseError(msg) from None
        if not 0 <= index < n_vertices:
            msg = f"{path}: line {line}: vertex {index} out of range for {n_vertices} vertices"
            raise RegionParseError(msg)
        indices.append(index)
    if not indices:
        msg = f"{path}: region file lists no vertices"
        raise RegionParseError(msg)
    return np.unique(np.asarray(indices, dtype=np.int64))
