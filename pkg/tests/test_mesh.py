import math
from pathlib import Path

import numpy as np
import pytest

from slepiankit.exceptions import InvalidInputError, MeshFormatError, RegionParseError
from slepiankit.mesh import (
    LaplacianKind,
    Mesh,
    graph_laplacian,
    icosphere,
    load_mesh,
    load_vertex_region,
    mesh_basis,
    mesh_forward_slepian,
    mesh_inverse_slepian,
    mesh_laplacian,
    mesh_slepian,
    mesh_wavelet_field,
    mesh_wavelets,
    write_off,
)
from slepiankit.wavelets import analysis, synthesis

PATH_EDGES = [[0, 1], [1, 2]]

TETRAHEDRON_OFF = """\
OFF
# regular tetrahedron with unit edges
4 4 0
0 0 0
1 0 0
0.5 {h} 0
0.5 {c} {z}
3 0 2 1
3 0 1 3
3 1 2 3
3 2 0 3
""".format(
    h=math.sqrt(3) / 2, c=math.sqrt(3) / 6, z=math.sqrt(2 / 3)
)


@pytest.fixture(scope="module")
def sphere_mesh() -> Mesh:
    return icosphere(2)


@pytest.fixture(scope="module")
def sphere_basis(sphere_mesh):
    return mesh_basis(
        mesh_laplacian(sphere_mesh), sphere_mesh.vertex_weights, 50, mesh=sphere_mesh
    )


@pytest.fixture(scope="module")
def path_basis():
    return mesh_basis(graph_laplacian(3, PATH_EDGES), np.ones(3), 3)


def _north(mesh: Mesh) -> np.ndarray:
    return np.flatnonzero(mesh.vertices[:, 2] >= 0)


def test_single_triangle_weights():
    # unit-area right triangle
    mesh = Mesh.from_arrays([[0, 0, 0], [math.sqrt(2), 0, 0], [0, math.sqrt(2), 0]], [[0, 1, 2]])
    assert mesh.vertex_weights == pytest.approx([1 / 3] * 3, abs=1e-15)


def test_tetrahedron_area(tmp_path: Path):
    path = tmp_path / "tetra.off"
    path.write_text(TETRAHEDRON_OFF)
    mesh = load_mesh(path)
    assert (mesh.n_vertices, mesh.n_faces) == (4, 4)
    assert mesh.total_area == pytest.approx(math.sqrt(3), abs=1e-12)


def test_empty_faces():
    vertices = np.eye(3)
    with pytest.raises(MeshFormatError, match="no incident face"):
        Mesh.from_arrays(vertices, np.zeros((0, 3)))
    mesh = Mesh.from_arrays(vertices, np.zeros((0, 3)), strict=False)
    assert np.all(mesh.vertex_weights == 0)


def test_from_arrays_rejects_bad_faces():
    with pytest.raises(MeshFormatError, match="out of range"):
        Mesh.from_arrays(np.eye(3), [[0, 1, 3]])
    with pytest.raises(MeshFormatError, match="degenerate"):
        Mesh.from_arrays([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])


def test_icosphere_counts(sphere_mesh):
    assert icosphere(0).n_vertices == 12
    assert icosphere(1).n_vertices == 42
    assert sphere_mesh.n_vertices == 162
    assert sphere_mesh.n_faces == 320
    assert np.allclose(np.linalg.norm(sphere_mesh.vertices, axis=1), 1.0)
    assert sphere_mesh.total_area < 4 * math.pi
    with pytest.raises(InvalidInputError):
        icosphere(-1)


def test_path_graph_laplacian():
    laplacian = graph_laplacian(3, PATH_EDGES).toarray()
    assert np.array_equal(laplacian, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    # a repeated edge counts once
    assert np.array_equal(graph_laplacian(3, PATH_EDGES + [[1, 0]]).toarray(), laplacian)
    with pytest.raises(InvalidInputError):
        graph_laplacian(2, PATH_EDGES)


@pytest.mark.parametrize("kind", list(LaplacianKind))
def test_laplacian_rows_and_symmetry(kind, sphere_mesh):
    laplacian = mesh_laplacian(sphere_mesh, kind).toarray()
    assert np.max(np.abs(laplacian @ np.ones(sphere_mesh.n_vertices))) <= 1e-12
    assert np.max(np.abs(laplacian - laplacian.T)) <= 1e-12
    assert np.all(np.linalg.eigvalsh(laplacian) >= -1e-10)


def test_cotangent_laplacian_worker_independent(sphere_mesh):
    one = mesh_laplacian(sphere_mesh, workers=1).toarray()
    many = mesh_laplacian(sphere_mesh, workers=4).toarray()
    assert np.array_equal(one, many)


def test_path_basis(path_basis):
    assert path_basis.eigenvalues == pytest.approx([0.0, 1.0, 3.0], abs=1e-12)
    assert path_basis.vectors[0] == pytest.approx([1 / math.sqrt(3)] * 3, abs=1e-12)


def test_basis_orthonormal(sphere_basis, sphere_mesh):
    weights = sphere_mesh.vertex_weights
    gram = (sphere_basis.vectors * weights) @ sphere_basis.vectors.T
    assert np.max(np.abs(gram - np.eye(50))) <= 1e-8
    assert abs(sphere_basis.eigenvalues[0]) <= 1e-9
    constant = 1 / math.sqrt(sphere_mesh.total_area)
    assert np.allclose(sphere_basis.vectors[0], constant, atol=1e-9)
    assert np.all(np.diff(sphere_basis.eigenvalues) >= -1e-12)


def test_basis_of_two_components():
    mesh = Mesh.from_arrays(
        [[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 0, 0], [6, 0, 0], [5, 1, 0]],
        [[0, 1, 2], [3, 4, 5]],
    )
    basis = mesh_basis(mesh_laplacian(mesh, LaplacianKind.COMBINATORIAL), mesh.vertex_weights, 3)
    assert basis.eigenvalues[:2] == pytest.approx([0.0, 0.0], abs=1e-12)
    assert basis.eigenvalues[2] > 0.5


def test_basis_validation():
    laplacian = graph_laplacian(3, PATH_EDGES)
    with pytest.raises(InvalidInputError, match="outside"):
        mesh_basis(laplacian, np.ones(3), 4)
    with pytest.raises(InvalidInputError, match="non-positive"):
        mesh_basis(laplacian, [1.0, 0.0, 1.0], 2)
    with pytest.raises(InvalidInputError, match="does not match"):
        mesh_basis(laplacian, np.ones(4), 2)


def test_basis_drops_zero_weight_vertices():
    laplacian = graph_laplacian(4, PATH_EDGES)
    basis = mesh_basis(laplacian, [1.0, 1.0, 1.0, 0.0], 3, strict=False)
    assert np.all(basis.vectors[:, 3] == 0)
    assert basis.eigenvalues == pytest.approx([0.0, 1.0, 3.0], abs=1e-12)


def test_whole_mesh_concentration_is_identity(sphere_basis, sphere_mesh):
    msb = mesh_slepian(sphere_basis, np.arange(sphere_mesh.n_vertices))
    assert np.allclose(msb.eigenvalues, 1.0, atol=1e-8)
    assert msb.shannon == pytest.approx(50)


def test_concentration_trace(path_basis):
    for region in ([0], [0, 2], [0, 1, 2]):
        msb = mesh_slepian(path_basis, region)
        assert np.sum(msb.raw_eigenvalues) == pytest.approx(msb.shannon, abs=1e-8)
        assert msb.shannon == pytest.approx(len(region))


def test_hemisphere_trace_is_shannon(sphere_mesh, sphere_basis):
    north = np.flatnonzero(sphere_mesh.vertices[:, 2] > 0)
    msb = mesh_slepian(sphere_basis, north)
    assert np.sum(msb.raw_eigenvalues) == pytest.approx(msb.shannon, abs=1e-8)
    assert 0 < msb.shannon < min(50, north.size)
    weights = sphere_mesh.vertex_weights
    assert msb.area_shannon == pytest.approx(50 * weights[north].sum() / weights.sum())


def test_full_basis_trace_counts_region_vertices(sphere_mesh):
    n = sphere_mesh.n_vertices
    full = mesh_basis(mesh_laplacian(sphere_mesh), sphere_mesh.vertex_weights, n)
    north = np.flatnonzero(sphere_mesh.vertices[:, 2] > 0)
    msb = mesh_slepian(full, north)
    assert msb.shannon == pytest.approx(north.size, abs=1e-8)
    assert mesh_wavelets(msb).params.T == north.size


def test_single_vertex_is_rank_one():
    basis = mesh_basis(graph_laplacian(3, PATH_EDGES), np.ones(3), 2)
    msb = mesh_slepian(basis, [0])
    expected = float(np.sum(basis.vectors[:, 0] ** 2))
    assert msb.eigenvalues[0] == pytest.approx(expected, abs=1e-12)
    assert msb.eigenvalues[1] == pytest.approx(0.0, abs=1e-12)


def test_mesh_slepian_orders_and_concentrates(sphere_basis, sphere_mesh):
    north = _north(sphere_mesh)
    msb = mesh_slepian(sphere_basis, north)
    assert np.all(np.diff(msb.eigenvalues) <= 1e-12)
    assert np.allclose(msb.vectors @ msb.vectors.T, np.eye(50), atol=1e-10)
    weights = sphere_mesh.vertex_weights
    field = msb.vertex_field(0)
    inside = np.sum(weights[north] * field[north] ** 2)
    assert inside / np.sum(weights * field**2) == pytest.approx(msb.eigenvalues[0], abs=1e-8)
    with pytest.raises(InvalidInputError):
        msb.vertex_field(50)


def test_mesh_region_validation(path_basis):
    with pytest.raises(InvalidInputError, match="at least one"):
        mesh_slepian(path_basis, [])
    with pytest.raises(InvalidInputError, match="out of range"):
        mesh_slepian(path_basis, [3])


def test_mesh_slepian_round_trip(sphere_basis, sphere_mesh):
    msb = mesh_slepian(sphere_basis, _north(sphere_mesh))
    rng = np.random.default_rng(3)
    coefficients = rng.standard_normal(50)
    field = mesh_inverse_slepian(coefficients, msb)
    assert np.allclose(mesh_forward_slepian(field, msb), coefficients, atol=1e-8)
    assert mesh_forward_slepian(field, msb, P=5).shape == (5,)
    with pytest.raises(InvalidInputError):
        mesh_forward_slepian(field[:-1], msb)
    with pytest.raises(InvalidInputError):
        mesh_inverse_slepian(np.ones(51), msb)


def test_mesh_wavelets(sphere_basis, sphere_mesh):
    msb = mesh_slepian(sphere_basis, _north(sphere_mesh))
    tiling = mesh_wavelets(msb, B=2.0, J_min=0)
    assert tiling.params.T == math.ceil(msb.shannon - 1e-9)
    f = np.random.default_rng(1).standard_normal(tiling.params.T)
    assert np.allclose(synthesis(analysis(f, tiling), tiling), f, atol=1e-10)
    total = sum(mesh_wavelet_field(msb, tiling, j) for j in tiling.scales)
    assert total.shape == (sphere_mesh.n_vertices,)
    scaling = mesh_wavelet_field(msb, tiling)
    coefficients = mesh_forward_slepian(scaling, msb, tiling.params.T)
    assert np.allclose(coefficients, tiling.eta, atol=1e-8)


def test_off_round_trip(tmp_path: Path, sphere_mesh):
    path = tmp_path / "sphere.off"
    write_off(sphere_mesh, path)
    loaded = load_mesh(path)
    assert np.array_equal(loaded.vertices, sphere_mesh.vertices)
    assert np.array_equal(loaded.faces, sphere_mesh.faces)


def test_off_counts_on_header_line(tmp_path: Path):
    path = tmp_path / "tri.off"
    path.write_text("OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    assert load_mesh(path).n_faces == 1


@pytest.mark.parametrize(
    ("text", "line", "match"),
    [
        ("PLY\n", 1, "start with 'OFF'"),
        ("OFF\n3 1 0\n0 0 0\n1 0 x\n0 1 0\n3 0 1 2\n", 4, "could not parse"),
        ("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n4 0 1 2 3\n", 7, "triangular"),
        ("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n", 6, "out of range"),
        ("OFF\n3 2 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n", 6, "ends early"),
        ("OFF\n3 1 0\n0 0\n1 0 0\n0 1 0\n3 0 1 2\n", 3, "3 coordinates"),
    ],
)
def test_off_errors(tmp_path: Path, text, line, match):
    path = tmp_path / "bad.off"
    path.write_text(text)
    with pytest.raises(MeshFormatError, match=match) as info:
        load_mesh(path)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_obj(tmp_path: Path):
    path = tmp_path / "tri.obj"
    path.write_text("# triangle\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2/2/1 -1\n")
    mesh = load_mesh(path)
    assert np.array_equal(mesh.faces, [[0, 1, 2]])

    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n")
    with pytest.raises(MeshFormatError, match="line 5"):
        load_mesh(path)
    path.write_text("v 0 0 0\nv 1 0 0\nf 1 2 3\n")
    with pytest.raises(MeshFormatError, match="out of range"):
        load_mesh(path)


def test_load_mesh_file_errors(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "missing.off")
    path = tmp_path / "mesh.stl"
    path.write_text("solid\n")
    with pytest.raises(MeshFormatError, match="Unsupported"):
        load_mesh(path)


def test_load_vertex_region(tmp_path: Path):
    path = tmp_path / "region.txt"
    path.write_text("# north\n2\n0\n2\n")
    assert np.array_equal(load_vertex_region(path, 3), [0, 2])
    path.write_text("0\nfive\n")
    with pytest.raises(RegionParseError, match="line 2"):
        load_vertex_region(path, 3)
    path.write_text("0\n3\n")
    with pytest.raises(RegionParseError, match="line 2: vertex 3 out of range"):
        load_vertex_region(path, 3)
    path.write_text("# nothing\n")
    with pytest.raises(RegionParseError, match="no vertices"):
        load_vertex_region(path, 3)
