"""Dense Galerkin matrices for the PMCHWT system on an RWG basis.

The T operator is realised in mixed-potential form

    T_mn = -jk <f_m, G f_n> + (j/k) <div f_m, G div f_n>

and K_mn = <f_m, grad G x f_n> (principal value).  With the unknowns ordered
[M; J] the K-diagonal system is

    Z = sum_i [[K_i, -eta_i T_i], [T_i / eta_i, K_i]],   v = [v^E; v^H]

with v^E_m = <f_m, E_inc> and v^H_m = -<f_m, H_inc>.  The T-diagonal
arrangement acts on [J; M] and is the same matrix with its column blocks
swapped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .emcore import Medium, PlaneWave, QuadratureRule, plane_wave_fields, quadrature_rule
from .errors import DimensionMismatchError, InvalidParamError, QuadratureFailure
from .mesh import RwgBasisSet

NEAR_FACTOR = 3.0
# outer and smooth-remainder rule for near pairs
NEAR_RULE_POINTS = 12


def _edge_map(n_edges: int, edges) -> tuple[np.ndarray, np.ndarray]:
    edges = np.arange(n_edges) if edges is None else np.asarray(edges, dtype=np.int64)
    if edges.ndim != 1 or (len(edges) and (edges.min() < 0 or edges.max() >= n_edges)):
        raise InvalidParamError("edge indices out of range")
    m = -np.ones(n_edges, dtype=np.int64)
    m[edges] = np.arange(len(edges))
    return edges, m


def _support(basis: RwgBasisSet, edges: np.ndarray) -> np.ndarray:
    return np.unique(np.concatenate([basis.tri_plus[edges], basis.tri_minus[edges]]))


def assemble_operators(
    basis: RwgBasisSet,
    wavenumbers: Sequence[complex],
    test_edges=None,
    trial_edges=None,
    quad: QuadratureRule | None = None,
    near_factor: float = NEAR_FACTOR,
    static_ok: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """K and T blocks for each wavenumber, shape (len(wavenumbers), n_test, n_trial).

    ``static_ok`` admits k = 0, for which only K (the static double layer)
    is meaningful; the corresponding T slice is left at zero.
    """
    quad = quad or quadrature_rule(6)
    near_quad = quad if quad.npoints >= NEAR_RULE_POINTS else quadrature_rule(NEAR_RULE_POINTS)
    mesh = basis.mesh
    ne = basis.n
    test, row_map = _edge_map(ne, test_edges)
    trial, col_map = _edge_map(ne, trial_edges)
    ks = np.asarray(wavenumbers, dtype=np.complex128).ravel()
    if not np.all(np.isfinite(ks)):
        raise InvalidParamError("wavenumbers must be finite")
    if not static_ok and np.any(ks == 0):
        raise InvalidParamError("wavenumber must be nonzero")
    corners = np.ascontiguousarray(mesh.corners)
    diam = np.linalg.norm(corners - np.roll(corners, 1, axis=1), axis=2).max(axis=1)
    K, T = _kernels.assemble_kt(
        corners,
        np.ascontiguousarray(mesh.normals),
        np.ascontiguousarray(mesh.areas),
        np.ascontiguousarray(mesh.centroids),
        diam,
        np.ascontiguousarray(mesh.triangle_edges),
        np.ascontiguousarray(basis.tri_coef),
        np.ascontiguousarray(quad.bary),
        np.ascontiguousarray(quad.weights),
        np.ascontiguousarray(near_quad.bary),
        np.ascontiguousarray(near_quad.weights),
        ks,
        _support(basis, test),
        _support(basis, trial),
        row_map,
        col_map,
        float(near_factor),
        len(test),
        len(trial),
    )
    if not (np.isfinite(K).all() and np.isfinite(T).all()):
        raise QuadratureFailure("non-finite operator entry")
    return K, T


def assemble_T(basis, test_edges, trial_edges, medium: Medium, quad=None) -> np.ndarray:
    return assemble_operators(basis, [medium.k], test_edges, trial_edges, quad)[1][0]


def assemble_K(basis, test_edges, trial_edges, medium: Medium, quad=None) -> np.ndarray:
    return assemble_operators(basis, [medium.k], test_edges, trial_edges, quad, static_ok=True)[0][0]


def gram_locals(basis: RwgBasisSet) -> np.ndarray:
    """Per-triangle int (n x f_a).f_b over the three local RWG halves, (F, 3, 3)."""
    mesh = basis.mesh
    p = mesh.corners
    c = mesh.centroids
    area = mesh.areas
    nrm = mesh.normals
    pa = p[:, :, None, :]
    pb = p[:, None, :, :]
    # int_T (x - p_a) x (x - p_b) = A [c x (p_a - p_b) + p_a x p_b]
    vec = area[:, None, None, None] * (np.cross(c[:, None, None, :], pa - pb) + np.cross(pa, pb))
    loc = np.einsum("fd,fabd->fab", nrm, vec)
    coef = basis.tri_coef
    return loc * coef[:, :, None] * coef[:, None, :]


def assemble_gram(basis: RwgBasisSet, edges=None) -> np.ndarray:
    """[G]_ij = int (n x f_i).f_j over an edge set; exactly antisymmetric."""
    sel, emap = _edge_map(basis.n, edges)
    loc = gram_locals(basis)
    loc = 0.5 * (loc - loc.transpose(0, 2, 1))
    te = emap[basis.mesh.triangle_edges]
    rows = np.broadcast_to(te[:, :, None], loc.shape).ravel()
    cols = np.broadcast_to(te[:, None, :], loc.shape).ravel()
    keep = (rows >= 0) & (cols >= 0)
    G = np.zeros((len(sel), len(sel)))
    np.add.at(G, (rows[keep], cols[keep]), loc.ravel()[keep])
    return 0.5 * (G - G.T)


def project_field(basis: RwgBasisSet, fields, edges=None, quad: QuadratureRule | None = None) -> np.ndarray:
    """Testing integrals <f_m, F> for vector fields sampled by callables.

    ``fields`` is a list of callables mapping (F, q, 3) points to complex
    (F, q, 3) field values; the result has shape (n_edges, len(fields)).
    """
    quad = quad or quadrature_rule(6)
    sel, emap = _edge_map(basis.n, edges)
    mesh = basis.mesh
    tris = _support(basis, sel)
    pts = quad.points_on(mesh.corners[tris])
    w = quad.weights[None, :] * mesh.areas[tris][:, None]
    rel = pts[:, None, :, :] - mesh.corners[tris][:, :, None, :]  # (F, a, q, 3)
    coef = basis.tri_coef[tris]
    te = emap[mesh.triangle_edges[tris]].ravel()
    keep = te >= 0
    out = np.zeros((len(sel), len(fields)), dtype=np.complex128)
    for col, fn in enumerate(fields):
        vals = np.broadcast_to(np.asarray(fn(pts), dtype=np.complex128), pts.shape)
        loc = np.einsum("faqd,fqd,fq->fa", rel, vals, w) * coef
        np.add.at(out[:, col], te[keep], loc.ravel()[keep])
    return out


def assemble_excitation(
    basis: RwgBasisSet,
    waves: Sequence[PlaneWave],
    exterior: Medium,
    edges=None,
    quad: QuadratureRule | None = None,
) -> np.ndarray:
    """Columns [v^E; v^H] for each wave, shape (2 n_edges, n_waves)."""
    if not waves:
        raise InvalidParamError("at least one wave is required")
    fields = []
    for wave in waves:
        fields.append(lambda p, wave=wave: plane_wave_fields(wave, exterior, p)[0])
        fields.append(lambda p, wave=wave: -plane_wave_fields(wave, exterior, p)[1])
    proj = project_field(basis, fields, edges, quad)
    return np.vstack([proj[:, 0::2], proj[:, 1::2]])


@dataclass(eq=False)
class ImpedanceBlocks:
    """Per-medium K and T matrices over one edge set, plus the media."""

    K: np.ndarray  # (2, n, n)
    T: np.ndarray
    media: tuple[Medium, Medium]

    @property
    def n(self) -> int:
        return self.K.shape[1]

    def z(self, arrangement: str = "K-diagonal") -> np.ndarray:
        n = self.n
        Z = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        for i, med in enumerate(self.media):
            eta = med.eta
            Z[:n, :n] += self.K[i]
            Z[n:, n:] += self.K[i]
            Z[:n, n:] -= eta * self.T[i]
            Z[n:, :n] += self.T[i] / eta
        if arrangement == "K-diagonal":
            return Z
        if arrangement == "T-diagonal":
            return to_tdiag(Z)
        raise InvalidParamError(f"unknown arrangement {arrangement!r}")


def to_tdiag(Z: np.ndarray) -> np.ndarray:
    """Swap column blocks: the T-diagonal matrix acting on [J; M]."""
    n = Z.shape[1] // 2
    return np.concatenate([Z[:, n:], Z[:, :n]], axis=1)


def swap_halves(x: np.ndarray) -> np.ndarray:
    n = x.shape[0] // 2
    return np.concatenate([x[n:], x[:n]], axis=0)


def assemble_blocks(
    basis: RwgBasisSet,
    media: tuple[Medium, Medium],
    quad: QuadratureRule | None = None,
    exterior_cache: tuple[np.ndarray, np.ndarray] | None = None,
    near_factor: float = NEAR_FACTOR,
) -> ImpedanceBlocks:
    """Assemble both media; ``exterior_cache`` = (K1, T1) skips the exterior pass."""
    if len(media) != 2:
        raise DimensionMismatchError("exactly two media (exterior, interior) are required")
    if exterior_cache is None:
        K, T = assemble_operators(basis, [media[0].k, media[1].k], quad=quad, near_factor=near_factor)
        return ImpedanceBlocks(K, T, tuple(media))
    K2, T2 = assemble_operators(basis, [media[1].k], quad=quad, near_factor=near_factor)
    K1, T1 = exterior_cache
    return ImpedanceBlocks(np.stack([K1, K2[0]]), np.stack([T1, T2[0]]), tuple(media))


def assemble_Z(basis: RwgBasisSet, media, arrangement: str = "K-diagonal", quad=None) -> np.ndarray:
    return assemble_blocks(basis, media, quad).z(arrangement)
