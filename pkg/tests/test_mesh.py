import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcbf.emcore import quadrature_rule
from dualcbf.errors import DegenerateTriangleError, InvalidParamError, NonManifoldError, ParseError
from dualcbf.mesh import (
    TriangleMesh,
    build_rwg,
    cube_mesh,
    cylinder_mesh,
    generate_geometry,
    icosphere,
    load_mesh,
    make_mesh,
    partition_cells,
    replicate,
    save_mesh,
)

TETRA_OBJ = """# regular tetrahedron
v 1 1 1
v 1 -1 -1
v -1 1 -1
v -1 -1 1
f 1 2 3
f 1 3 4
f 1 4 2
f 2 4 3
"""


def uv_sphere(n_lon: int, n_bands: int, radius: float = 1.0):
    """Latitude/longitude sphere with 2 n_lon (n_bands - 1) triangles."""
    verts = [[0.0, 0.0, radius]]
    for i in range(1, n_bands):
        th = math.pi * i / n_bands
        for j in range(n_lon):
            ph = 2 * math.pi * j / n_lon
            verts.append([radius * math.sin(th) * math.cos(ph), radius * math.sin(th) * math.sin(ph), radius * math.cos(th)])
    verts.append([0.0, 0.0, -radius])
    south = len(verts) - 1
    ring = lambda i, j: 1 + (i - 1) * n_lon + j % n_lon  # noqa: E731
    tris = [[0, ring(1, j), ring(1, j + 1)] for j in range(n_lon)]
    for i in range(1, n_bands - 1):
        for j in range(n_lon):
            a, b, c, d = ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1)
            tris += [[a, c, d], [a, d, b]]
    tris += [[south, ring(n_bands - 1, j + 1), ring(n_bands - 1, j)] for j in range(n_lon)]
    return np.array(verts), np.array(tris)


def test_tetrahedron_obj(tmp_path):
    p = tmp_path / "tetra.obj"
    p.write_text(TETRA_OBJ)
    mesh = load_mesh(p)
    assert mesh.n_triangles == 4
    assert mesh.n_edges == 6
    # outward: normal points away from the centroid of the solid
    outward = np.einsum("ij,ij->i", mesh.normals, mesh.centroids - mesh.vertices.mean(axis=0))
    assert np.all(outward > 0)


def test_obj_with_inward_faces_is_reoriented(tmp_path):
    flipped = TETRA_OBJ.replace("f 1 2 3", "f 3 2 1").replace("f 1 3 4", "f 4 3 1")
    p = tmp_path / "t.obj"
    p.write_text(flipped)
    mesh = load_mesh(p)
    assert mesh.signed_volume() > 0


def test_480_triangle_sphere_file(tmp_path):
    v, t = uv_sphere(12, 21)
    assert len(t) == 480
    mesh = make_mesh(v, t)
    save_mesh(mesh, tmp_path / "s.json")
    loaded = load_mesh(tmp_path / "s.json")
    assert loaded.n_edges == 720
    assert 2 * build_rwg(loaded).n == 1440


def test_open_cube_is_non_manifold():
    cube = cube_mesh(1.0, 2)
    keep = cube.normals[:, 2] < 0.5  # drop the +z face
    with pytest.raises(NonManifoldError):
        TriangleMesh(cube.vertices, cube.triangles[keep])
    with pytest.raises(NonManifoldError):
        make_mesh(cube.vertices, cube.triangles[keep])


def test_degenerate_triangle_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]], dtype=float)
    t = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
    with pytest.raises(DegenerateTriangleError):
        TriangleMesh(v, t)


def test_inconsistent_orientation_rejected_by_constructor():
    mesh = icosphere(1.0, 1)
    tris = np.array(mesh.triangles)
    tris[0] = tris[0][::-1]
    with pytest.raises(NonManifoldError):
        TriangleMesh(mesh.vertices, tris)


@pytest.mark.parametrize(
    "text",
    ["v 0 0 0\nf 1 2 3\n", "v 0 0 x\n", "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4\n", ""],
)
def test_obj_parse_errors(tmp_path, text):
    p = tmp_path / "bad.obj"
    p.write_text(text)
    with pytest.raises(ParseError):
        load_mesh(p)


def test_json_parse_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"vertices": [[0, 0, 0]]}')
    with pytest.raises(ParseError):
        load_mesh(p)
    with pytest.raises(ParseError):
        load_mesh(tmp_path / "missing.json")


def test_json_round_trip_bit_identical(tmp_path):
    mesh = generate_geometry("cylinder", radius=0.3, height=0.7, edge_length=0.15)
    save_mesh(mesh, tmp_path / "m.json")
    again = load_mesh(tmp_path / "m.json")
    assert np.array_equal(mesh.vertices, again.vertices)
    assert np.array_equal(mesh.triangles, again.triangles)
    save_mesh(again, tmp_path / "m2.json")
    assert (tmp_path / "m.json").read_bytes() == (tmp_path / "m2.json").read_bytes()


def test_sphere_960_unknowns():
    mesh = generate_geometry("sphere", diameter=1 / 3, level=2)
    assert 2 * build_rwg(mesh).n == 960
    r = np.linalg.norm(mesh.vertices, axis=1)
    np.testing.assert_allclose(r, 1 / 6)


def test_sphere_array_30720_unknowns():
    mesh = generate_geometry(
        "array", base={"kind": "sphere", "diameter": 1 / 3, "level": 2}, counts=[4, 4, 2], spacing=0.5
    )
    assert mesh.n_components == 32
    assert 2 * mesh.n_edges == 30720


def test_unit_array_is_identity():
    base = generate_geometry("cube", side=0.4, n=3)
    arr = generate_geometry("array", base={"kind": "cube", "side": 0.4, "n": 3}, counts=[1, 1, 1], spacing=0.5)
    assert np.array_equal(base.vertices, arr.vertices)
    assert np.array_equal(base.triangles, arr.triangles)


@pytest.mark.parametrize(
    "kind, params",
    [
        ("sphere", {"diameter": -1}),
        ("cube", {"side": 0}),
        ("cylinder", {"radius": 0.5, "height": -2}),
        ("array", {"counts": [0, 1, 1]}),
        ("torus", {}),
    ],
)
def test_generator_rejects_bad_params(kind, params):
    with pytest.raises(InvalidParamError):
        generate_geometry(kind, **params)


@pytest.mark.parametrize(
    "mesh",
    [
        icosphere(0.5, 1),
        cube_mesh(0.4, 3),
        cylinder_mesh(0.5, 1.2, 14, 5, 2),
        replicate(icosphere(0.1, 1), (2, 1, 2), 0.5),
    ],
    ids=["sphere", "cube", "cylinder", "array"],
)
def test_closed_mesh_invariants(mesh):
    assert 2 * mesh.n_edges == 3 * mesh.n_triangles
    assert mesh.signed_volume() > 0
    assert np.all(mesh.areas > 0)
    basis = build_rwg(mesh)
    assert basis.n == 3 * mesh.n_triangles // 2


def test_cylinder_volume_and_orientation():
    r, h = 0.5, 1.0
    mesh = cylinder_mesh(r, h, 64, 6, 8)
    # inscribed polygon area n/2 r^2 sin(2 pi / n)
    exact = 32 * r * r * math.sin(2 * math.pi / 64) * h
    assert mesh.signed_volume() == pytest.approx(exact, rel=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2), st.floats(0.05, 2.0), st.tuples(*[st.floats(-3, 3)] * 3))
def test_generated_spheres_outward(level, radius, center):
    mesh = icosphere(radius, level, center)
    assert mesh.signed_volume() > 0
    assert 2 * mesh.n_edges == 3 * mesh.n_triangles
    outward = np.einsum("ij,ij->i", mesh.normals, mesh.centroids - np.array(center))
    assert np.all(outward > 0)


# ---------------------------------------------------------------------------
# RWG
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def sphere_basis():
    return build_rwg(icosphere(1 / 6, 2))


def test_rwg_divergence_on_plus_triangle(sphere_basis):
    b = sphere_basis
    dp, dm = b.divergence()
    np.testing.assert_allclose(dp, b.length / b.mesh.areas[b.tri_plus])
    # total charge of each RWG vanishes
    np.testing.assert_allclose(dp * b.mesh.areas[b.tri_plus] + dm * b.mesh.areas[b.tri_minus], 0, atol=1e-12)


def test_rwg_divergence_numerically(sphere_basis):
    # div f = (1/A) * outward flux through the triangle boundary; use the linear field directly
    b = sphere_basis
    n = 17
    tri = b.tri_plus[n]
    c = b.mesh.corners[tri]
    flux = 0.0
    nrm = b.mesh.normals[tri]
    for i in range(3):
        a, e = c[i], c[(i + 1) % 3]
        mid = (a + e) / 2
        out = np.cross(e - a, nrm)
        flux += b.evaluate(n, tri, mid[None])[0] @ out
    assert flux / b.mesh.areas[tri] == pytest.approx(b.length[n] / b.mesh.areas[tri], rel=1e-12)


def test_rwg_flux_across_edge_equals_length(sphere_basis):
    b = sphere_basis
    mesh = b.mesh
    for n in (0, 5, 123, 479):
        v0, v1 = mesh.vertices[mesh.edges[n]]
        tri = b.tri_plus[n]
        # unit vector in the plane of tri, normal to the edge, pointing away from p+
        t = v1 - v0
        out = np.cross(t, mesh.normals[tri])
        out /= np.linalg.norm(out)
        p_plus = mesh.corners[tri, b.free_plus[n]]
        if out @ (v0 - p_plus) < 0:
            out = -out
        s = np.linspace(0, 1, 7)[:, None]
        pts = v0 + s * t
        normal_comp = b.evaluate(n, tri, pts) @ out
        # f.n is constant (= 1) along the defining edge, so the flux is l_n
        np.testing.assert_allclose(normal_comp, 1.0, rtol=1e-12)
        assert np.trapezoid(normal_comp, dx=b.length[n] / 6) == pytest.approx(b.length[n], rel=1e-12)


def test_rwg_normal_continuity(sphere_basis):
    b = sphere_basis
    mesh = b.mesh
    n = 42
    v0, v1 = mesh.vertices[mesh.edges[n]]
    mid = (v0 + v1) / 2
    fp = b.evaluate(n, b.tri_plus[n], mid[None])[0]
    fm = b.evaluate(n, b.tri_minus[n], mid[None])[0]
    m_plus = np.cross(v1 - v0, mesh.normals[b.tri_plus[n]])
    m_minus = np.cross(v1 - v0, mesh.normals[b.tri_minus[n]])
    m_plus /= np.linalg.norm(m_plus)
    m_minus /= np.linalg.norm(m_minus)
    # flux leaving the plus side enters the minus side
    assert abs(fp @ m_plus) == pytest.approx(abs(fm @ m_minus), rel=1e-12)


def test_rwg_outside_support_is_zero(sphere_basis):
    b = sphere_basis
    other = next(t for t in range(b.mesh.n_triangles) if t not in (b.tri_plus[0], b.tri_minus[0]))
    pts = quadrature_rule(3).points_on(b.mesh.corners[other])
    assert np.all(b.evaluate(0, other, pts) == 0)


# ---------------------------------------------------------------------------
# cells
# ---------------------------------------------------------------------------


def _assert_partition(part, n_edges):
    allc = np.concatenate(part.cells)
    assert len(allc) == n_edges
    assert np.array_equal(np.sort(allc), np.arange(n_edges))
    assert np.all(part.sizes >= 1)
    for m, cell in enumerate(part.cells):
        assert np.all(part.edge_cell[cell] == m)


def test_single_sphere_one_cell(sphere_basis):
    part = partition_cells(sphere_basis, mode="component")
    assert part.n_cells == 1
    assert part.sizes[0] == sphere_basis.n


def test_sphere_array_lattice_cells():
    mesh = generate_geometry("array", base={"kind": "sphere", "diameter": 1 / 3, "level": 2}, counts=[4, 4, 2], spacing=0.5)
    basis = build_rwg(mesh)
    part = partition_cells(basis, side=0.5)
    assert part.n_cells == 32
    assert np.all(part.sizes == 480)
    _assert_partition(part, basis.n)
    comp = partition_cells(basis, mode="component")
    assert sorted(map(tuple, part.cells)) == sorted(map(tuple, comp.cells))


def test_cylinder_32_cells():
    mesh = generate_geometry("cylinder", radius=1.2, height=9.6, n_phi=24, n_z=16, n_rings=3)
    basis = build_rwg(mesh)
    part = partition_cells(basis, side=1.25)
    assert part.n_cells == 32
    _assert_partition(part, basis.n)
    # some cell boundaries cut the single connected surface
    assert mesh.n_components == 1


def test_bounding_boxes_contain_midpoints():
    mesh = cube_mesh(1.0, 4)
    basis = build_rwg(mesh)
    part = partition_cells(basis, side=0.3)
    for cell, (lo, hi) in zip(part.cells, part.bounding_boxes()):
        mid = basis.midpoints[cell]
        assert np.all(mid >= lo - 1e-12) and np.all(mid < hi + 1e-12)
        np.testing.assert_allclose(hi - lo, 0.3)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 2.0), st.tuples(*[st.floats(-1, 1)] * 3))
def test_partition_is_exhaustive_and_disjoint(side, origin):
    basis = build_rwg(cylinder_mesh(0.4, 1.0, 12, 4, 2))
    part = partition_cells(basis, side=side, origin=origin)
    _assert_partition(part, basis.n)


def test_partition_rejects_bad_side(sphere_basis):
    with pytest.raises(InvalidParamError):
        partition_cells(sphere_basis, side=0.0)
    with pytest.raises(InvalidParamError):
        partition_cells(sphere_basis, side=1.0, mode="voronoi")
