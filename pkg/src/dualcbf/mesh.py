"""Closed triangle meshes, RWG basis functions and CBFM cell partitions.

Lengths are in exterior wavelengths.  Every mesh is validated on
construction: each edge is shared by exactly two triangles with opposite
orientation, and each closed component encloses positive volume, so all
normals point into the exterior region.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateTriangleError, InvalidParamError, NonManifoldError, ParseError


def _half_edges(triangles: np.ndarray) -> np.ndarray:
    """Directed edge opposite each local vertex: shape (F, 3, 2)."""
    t = triangles
    return np.stack(
        [
            np.stack([t[:, 1], t[:, 2]], axis=-1),
            np.stack([t[:, 2], t[:, 0]], axis=-1),
            np.stack([t[:, 0], t[:, 1]], axis=-1),
        ],
        axis=1,
    )


def _edge_table(triangles: np.ndarray):
    """Unique undirected edges and, for every (triangle, local vertex), its edge id."""
    he = _half_edges(triangles).reshape(-1, 2)
    key = np.sort(he, axis=1)
    edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return edges, inverse.reshape(-1, 3), counts


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Closed, consistently oriented, manifold triangle surface."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or t.ndim != 2 or t.shape[1] != 3:
            raise ParseError("vertices must be (V, 3) and triangles (F, 3)")
        if len(t) == 0:
            raise ParseError("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise ParseError("triangle vertex index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        self._validate()

    def _validate(self):
        scale = float(np.ptp(self.vertices, axis=0).max()) or 1.0
        bad = np.flatnonzero(self.areas <= 1e-14 * scale * scale)
        if len(bad):
            raise DegenerateTriangleError(f"triangle {int(bad[0])} has zero area")
        _, tri_edge, counts = _edge_table(self.triangles)
        if np.any(counts != 2):
            e = int(np.flatnonzero(counts != 2)[0])
            raise NonManifoldError(f"edge {e} is shared by {int(counts[e])} triangles (need exactly 2)")
        he = _half_edges(self.triangles).reshape(-1, 2)
        # consistent orientation: the two half-edges of each edge run in opposite directions
        order = np.argsort(tri_edge.ravel(), kind="stable")
        first, second = he[order[0::2]], he[order[1::2]]
        if np.any(first[:, 0] != second[:, 1]):
            raise NonManifoldError("inconsistent triangle orientation")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, (F, 3, 3)."""
        return self.vertices[self.triangles]

    @cached_property
    def _cross(self) -> np.ndarray:
        c = self.corners
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        return self._cross / (2.0 * self.areas[:, None])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def edges(self) -> np.ndarray:
        return _edge_table(self.triangles)[0]

    @cached_property
    def triangle_edges(self) -> np.ndarray:
        """Edge id opposite each local vertex, (F, 3)."""
        return _edge_table(self.triangles)[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def components(self) -> np.ndarray:
        """Connected-component label of every triangle."""
        tri_edge = self.triangle_edges.ravel()
        tri_of = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(tri_edge, kind="stable")
        a, b = tri_of[order[0::2]], tri_of[order[1::2]]
        adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(self.n_triangles,) * 2)
        return connected_components(adj, directed=False)[1]

    @property
    def n_components(self) -> int:
        return int(self.components.max()) + 1

    def signed_volume(self) -> float:
        c = self.corners
        return float(np.einsum("ij,ij->", c[:, 0], np.cross(c[:, 1], c[:, 2])) / 6.0)

    def translated(self, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=float), self.triangles)

    def to_json(self) -> str:
        return json.dumps({"vertices": self.vertices.tolist(), "triangles": self.triangles.tolist()})


# ---------------------------------------------------------------------------
# orientation repair and I/O
# ---------------------------------------------------------------------------


def orient_triangles(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Flip triangles so every closed component is consistently outward oriented."""
    tris = np.array(triangles, dtype=np.int64, copy=True)
    edges, tri_edge, counts = _edge_table(tris)
    if np.any(counts != 2):
        e = int(np.flatnonzero(counts != 2)[0])
        raise NonManifoldError(f"edge {tuple(edges[e])} is shared by {int(counts[e])} triangles")
    nf = len(tris)
    flat = tri_edge.ravel()
    order = np.argsort(flat, kind="stable")
    tri_of = np.repeat(np.arange(nf), 3)
    pairs = np.stack([tri_of[order[0::2]], tri_of[order[1::2]]], axis=1)
    neighbours = [[] for _ in range(nf)]
    for e, (a, b) in enumerate(pairs):
        neighbours[a].append((b, e))
        neighbours[b].append((a, e))

    def directed(t: np.ndarray, edge: np.ndarray) -> int:
        # +1 if the triangle traverses edge[0] -> edge[1]
        for i in range(3):
            if t[i] == edge[0] and t[(i + 1) % 3] == edge[1]:
                return 1
        return -1

    seen = np.zeros(nf, dtype=bool)
    components = []
    for seed in range(nf):
        if seen[seed]:
            continue
        seen[seed] = True
        comp = [seed]
        queue = deque([seed])
        while queue:
            t = queue.popleft()
            for nb, e in neighbours[t]:
                edge = edges[e]
                same = directed(tris[t], edge) == directed(tris[nb], edge)
                if not seen[nb]:
                    if same:
                        tris[nb] = tris[nb][::-1]
                    seen[nb] = True
                    comp.append(nb)
                    queue.append(nb)
                elif same:
                    raise NonManifoldError("surface is not orientable")
        components.append(np.array(comp))

    v = np.asarray(vertices, dtype=float)
    for comp in components:
        c = v[tris[comp]]
        vol = np.einsum("ij,ij->", c[:, 0], np.cross(c[:, 1], c[:, 2]))
        if vol < 0:
            tris[comp] = tris[comp][:, ::-1]
    return tris


def make_mesh(vertices, triangles) -> TriangleMesh:
    """Build a mesh after normalising orientation to outward normals."""
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64)
    if t.ndim != 2 or t.shape[1] != 3 or (len(t) and (t.min() < 0 or t.max() >= len(v))):
        raise ParseError("triangle indices malformed or out of range")
    return TriangleMesh(v, orient_triangles(v, t))


def _read_obj(text: str):
    verts, tris = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise ParseError(f"line {lineno}: only triangular faces are supported")
                tris.append([i - 1 if i > 0 else len(verts) + i for i in idx])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    return verts, tris


def load_mesh(path, fmt: str | None = None) -> TriangleMesh:
    """Read an OBJ (triangles only) or JSON ``{vertices, triangles}`` mesh."""
    path = Path(path)
    if fmt is None:
        fmt = "obj" if path.suffix.lower() == ".obj" else "json"
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    if fmt == "obj":
        verts, tris = _read_obj(text)
    elif fmt == "json":
        try:
            doc = json.loads(text)
            verts, tris = doc["vertices"], doc["triangles"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: {exc}") from None
    else:
        raise ParseError(f"unknown mesh format {fmt!r}")
    if not verts or not tris:
        raise ParseError(f"{path}: empty mesh")
    return make_mesh(np.array(verts, dtype=float), np.array(tris, dtype=np.int64))


def save_mesh(mesh: TriangleMesh, path) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, mesh.to_json())


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _merge(points: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = float(np.abs(points).max()) or 1.0
    key = np.round(points / scale, 10)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    return points[first], inverse.ravel()[triangles]


def icosphere(radius: float = 1.0 / 6.0, level: int = 2, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Subdivided icosahedron: 20 * 4**level triangles."""
    if radius <= 0 or level < 0:
        raise InvalidParamError("icosphere needs radius > 0 and level >= 0")
    g = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [[-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
         [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
         [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1]],
        dtype=float,
    )
    f = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]],
        dtype=np.int64,
    )
    v /= np.linalg.norm(v, axis=1)[:, None]
    for _ in range(level):
        verts = list(v)
        cache: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        v, f = np.array(verts), np.array(nf, dtype=np.int64)
    return make_mesh(v * radius + np.asarray(center, dtype=float), f)


def cube_mesh(side: float = 0.4, n: int = 4, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned cube with an n x n grid of split squares on every face."""
    if side <= 0 or n < 1:
        raise InvalidParamError("cube needs side > 0 and n >= 1")
    s = np.linspace(-0.5, 0.5, n + 1) * side
    uu, vv = np.meshgrid(s, s, indexing="ij")
    pts, tris = [], []
    base = 0
    for axis in range(3):
        for sign in (-1.0, 1.0):
            p = np.zeros(((n + 1) ** 2, 3))
            others = [a for a in range(3) if a != axis]
            p[:, axis] = sign * side / 2
            p[:, others[0]] = uu.ravel()
            p[:, others[1]] = vv.ravel()
            idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1) + base
            a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
            c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
            tris.append(np.stack([a, b, c], 1))
            tris.append(np.stack([a, c, d], 1))
            pts.append(p)
            base += len(p)
    v, t = _merge(np.vstack(pts), np.vstack(tris))
    return make_mesh(v + np.asarray(center, dtype=float), t)


def _zip_rings(inner: list[int], inner_ang: np.ndarray, outer: list[int], outer_ang: np.ndarray) -> list[list[int]]:
    """Triangulate the annulus between two closed rings sorted by angle."""
    if len(inner) == 1:
        m = len(outer)
        return [[inner[0], outer[j], outer[(j + 1) % m]] for j in range(m)]
    a, b = len(inner), len(outer)
    tris, i, j = [], 0, 0
    while i < a or j < b:
        next_a = inner_ang[i + 1] if i + 1 < a else inner_ang[0] + 2 * math.pi
        next_b = outer_ang[j + 1] if j + 1 < b else outer_ang[0] + 2 * math.pi
        if j == b or (i < a and next_a < next_b):
            tris.append([inner[i % a], inner[(i + 1) % a], outer[j % b]])
            i += 1
        else:
            tris.append([inner[i % a], outer[(j + 1) % b], outer[j % b]])
            j += 1
    return tris


def cylinder_mesh(
    radius: float = 0.5,
    height: float = 2.0,
    n_phi: int = 24,
    n_z: int = 16,
    n_rings: int = 3,
    center=(0.0, 0.0, 0.0),
) -> TriangleMesh:
    """Closed circular cylinder along z with ring-triangulated end caps."""
    if radius <= 0 or height <= 0 or n_phi < 3 or n_z < 1 or n_rings < 1:
        raise InvalidParamError("cylinder needs radius, height > 0, n_phi >= 3, n_z >= 1, n_rings >= 1")
    verts: list[np.ndarray] = []
    tris: list[list[int]] = []

    def add(p) -> int:
        verts.append(np.asarray(p, dtype=float))
        return len(verts) - 1

    ang = 2 * math.pi * np.arange(n_phi) / n_phi
    zs = np.linspace(-height / 2, height / 2, n_z + 1)
    rings = [[add((radius * math.cos(a), radius * math.sin(a), z)) for a in ang] for z in zs]
    for k in range(n_z):
        lo, hi = rings[k], rings[k + 1]
        for i in range(n_phi):
            i2 = (i + 1) % n_phi
            tris.append([lo[i], lo[i2], hi[i2]])
            tris.append([lo[i], hi[i2], hi[i]])
    for z, boundary in ((zs[0], rings[0]), (zs[-1], rings[-1])):
        prev, prev_ang = [add((0.0, 0.0, z))], np.zeros(1)
        for j in range(1, n_rings + 1):
            if j == n_rings:
                ring, ring_ang = boundary, ang
            else:
                m = max(3, int(round(n_phi * j / n_rings)))
                ring_ang = 2 * math.pi * np.arange(m) / m
                r = radius * j / n_rings
                ring = [add((r * math.cos(a), r * math.sin(a), z)) for a in ring_ang]
            tris += _zip_rings(prev, prev_ang, ring, ring_ang)
            prev, prev_ang = ring, ring_ang
    v = np.array(verts) + np.asarray(center, dtype=float)
    return make_mesh(v, np.array(tris, dtype=np.int64))


def replicate(mesh: TriangleMesh, counts=(1, 1, 1), spacing=(0.5, 0.5, 0.5)) -> TriangleMesh:
    """Copies of ``mesh`` on a regular lattice, x fastest."""
    counts = tuple(int(c) for c in counts)
    if len(counts) != 3 or min(counts) < 1:
        raise InvalidParamError("array counts must be three integers >= 1")
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (3,))
    if counts != (1, 1, 1) and np.any(spacing[np.array(counts) > 1] <= 0):
        raise InvalidParamError("array spacing must be positive")
    verts, tris = [], []
    nv = mesh.n_vertices
    copy = 0
    for iz in range(counts[2]):
        for iy in range(counts[1]):
            for ix in range(counts[0]):
                verts.append(mesh.vertices + spacing * np.array([ix, iy, iz]))
                tris.append(mesh.triangles + copy * nv)
                copy += 1
    return TriangleMesh(np.vstack(verts), np.vstack(tris))


def _positive(params: dict, name: str, default=None) -> float:
    val = params.get(name, default)
    if val is None or not np.all(np.asarray(val, dtype=float) > 0):
        raise InvalidParamError(f"parameter {name!r} must be positive, got {val!r}")
    return val


def generate_geometry(kind: str, **params) -> TriangleMesh:
    """Dispatch to the geometry generators.

    ``sphere``: diameter, level (or edge_length); ``cube``: side, n (or
    edge_length); ``cylinder``: radius, height, edge_length (or n_phi, n_z,
    n_rings); ``array``: base (dict with its own ``kind``), counts, spacing.
    """
    if kind == "sphere":
        d = _positive(params, "diameter", 1.0 / 3.0)
        level = params.get("level")
        if level is None:
            h = _positive(params, "edge_length", 0.05)
            # icosahedron edge ~ 1.05 r, halved per level
            level = max(0, int(math.ceil(math.log2(1.05 * d / 2 / h))))
        if int(level) < 0:
            raise InvalidParamError("sphere level must be >= 0")
        return icosphere(d / 2, int(level), params.get("center", (0.0, 0.0, 0.0)))
    if kind == "cube":
        side = _positive(params, "side", 0.4)
        n = params.get("n")
        if n is None:
            n = max(1, int(math.ceil(side / _positive(params, "edge_length", 0.1))))
        return cube_mesh(side, int(n), params.get("center", (0.0, 0.0, 0.0)))
    if kind == "cylinder":
        radius = _positive(params, "radius", 0.5)
        height = _positive(params, "height", 2.0)
        if "n_phi" in params:
            n_phi, n_z = int(params["n_phi"]), int(params.get("n_z", 8))
            n_rings = int(params.get("n_rings", 2))
        else:
            h = _positive(params, "edge_length", 0.1)
            n_phi = max(6, int(math.ceil(2 * math.pi * radius / h)))
            n_z = max(1, int(math.ceil(height / h)))
            n_rings = max(1, int(math.ceil(radius / h)))
        return cylinder_mesh(radius, height, n_phi, n_z, n_rings, params.get("center", (0.0, 0.0, 0.0)))
    if kind == "array":
        base = dict(params.get("base", {"kind": "sphere"}))
        base_kind = base.pop("kind", "sphere")
        if base_kind == "array":
            raise InvalidParamError("nested arrays are not supported")
        counts = params.get("counts", (1, 1, 1))
        spacing = _positive(params, "spacing", 0.5)
        return replicate(generate_geometry(base_kind, **base), counts, spacing)
    raise InvalidParamError(f"unknown geometry kind {kind!r}")


# ---------------------------------------------------------------------------
# RWG basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RwgBasisSet:
    """One RWG function per edge of a closed mesh.

    On its plus triangle f_n(r) = l_n / (2 A+) (r - p+), on its minus triangle
    f_n(r) = -l_n / (2 A-) (r - p-), with p+- the vertices opposite the edge.
    """

    mesh: TriangleMesh
    tri_plus: np.ndarray
    tri_minus: np.ndarray
    free_plus: np.ndarray  # local vertex index (0..2) of p+ inside tri_plus
    free_minus: np.ndarray
    length: np.ndarray
    tri_sign: np.ndarray = field(repr=False)  # (F, 3): +1 if tri is the plus side of the edge opposite vertex a
    tri_coef: np.ndarray = field(repr=False)  # (F, 3): sign * l / (2 A)

    @property
    def n(self) -> int:
        return len(self.length)

    @property
    def tri_edge(self) -> np.ndarray:
        return self.mesh.triangle_edges

    @cached_property
    def midpoints(self) -> np.ndarray:
        return self.mesh.vertices[self.mesh.edges].mean(axis=1)

    def divergence(self) -> tuple[np.ndarray, np.ndarray]:
        """Divergence on the plus and minus triangles."""
        a = self.mesh.areas
        return self.length / a[self.tri_plus], -self.length / a[self.tri_minus]

    def evaluate(self, n: int, tri: int, points) -> np.ndarray:
        """f_n at ``points`` lying on triangle ``tri`` (zero if tri is not in its support)."""
        points = np.asarray(points, dtype=float)
        mesh = self.mesh
        if tri == self.tri_plus[n]:
            sign, local = 1.0, self.free_plus[n]
        elif tri == self.tri_minus[n]:
            sign, local = -1.0, self.free_minus[n]
        else:
            return np.zeros_like(points)
        p = mesh.corners[tri, local]
        return sign * self.length[n] / (2 * mesh.areas[tri]) * (points - p)


def build_rwg(mesh: TriangleMesh) -> RwgBasisSet:
    tri_edge = mesh.triangle_edges
    nf, ne = mesh.n_triangles, mesh.n_edges
    flat = tri_edge.ravel()
    order = np.argsort(flat, kind="stable")
    slots = np.arange(3 * nf)[order]
    plus_slot, minus_slot = slots[0::2], slots[1::2]
    tri_plus, free_plus = np.divmod(plus_slot, 3)
    tri_minus, free_minus = np.divmod(minus_slot, 3)
    edges = mesh.edges
    length = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], axis=1)
    tri_sign = np.empty(3 * nf)
    tri_sign[plus_slot] = 1.0
    tri_sign[minus_slot] = -1.0
    tri_sign = tri_sign.reshape(nf, 3)
    tri_coef = tri_sign * length[tri_edge] / (2.0 * mesh.areas[:, None])
    assert len(tri_plus) == ne
    return RwgBasisSet(mesh, tri_plus, tri_minus, free_plus, free_minus, length, tri_sign, tri_coef)


# ---------------------------------------------------------------------------
# cells
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellPartition:
    """Disjoint assignment of RWG edges to cells."""

    cells: tuple[np.ndarray, ...]
    edge_cell: np.ndarray
    keys: tuple = ()
    side: float | None = None
    origin: np.ndarray | None = None

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.cells])

    def bounding_boxes(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Axis-aligned cube of each lattice cell (empty for component cells)."""
        if self.side is None:
            return []
        return [
            (self.origin + np.array(k) * self.side, self.origin + (np.array(k) + 1) * self.side)
            for k in self.keys
        ]


def _from_labels(labels: np.ndarray, keys, side=None, origin=None) -> CellPartition:
    uniq, inverse = np.unique(labels, return_inverse=True)
    cells = tuple(np.flatnonzero(inverse == i) for i in range(len(uniq)))
    return CellPartition(cells, inverse.astype(np.int64), tuple(keys[i] for i in uniq), side, origin)


def partition_cells(
    basis: RwgBasisSet,
    mesh: TriangleMesh | None = None,
    side: float | None = None,
    origin=None,
    mode: str = "cube",
) -> CellPartition:
    """Assign each edge to a cell by its midpoint (``mode='cube'``) or by component."""
    mesh = basis.mesh if mesh is None else mesh
    if mode == "component":
        comp = mesh.components[basis.tri_plus]
        return _from_labels(comp, {int(c): (int(c),) for c in np.unique(comp)})
    if mode != "cube":
        raise InvalidParamError(f"unknown partition mode {mode!r}")
    if side is None or side <= 0:
        raise InvalidParamError("cube partition needs side > 0")
    origin = mesh.vertices.min(axis=0) if origin is None else np.asarray(origin, dtype=float)
    idx = np.floor((basis.midpoints - origin) / side).astype(np.int64)
    uniq, inverse = np.unique(idx, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    cells = tuple(np.flatnonzero(inverse == i) for i in range(len(uniq)))
    keys = tuple(tuple(int(x) for x in k) for k in uniq)
    return CellPartition(cells, inverse.astype(np.int64), keys, float(side), origin)
