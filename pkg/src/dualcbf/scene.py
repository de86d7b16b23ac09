"""A scattering scene: mesh, basis, cells, media and lazily assembled matrices."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .emcore import Medium, QuadratureRule, quadrature_rule
from .mesh import CellPartition, RwgBasisSet, TriangleMesh, build_rwg, partition_cells
from .operators import NEAR_FACTOR, ImpedanceBlocks, assemble_blocks, assemble_excitation, assemble_gram


@dataclass(eq=False)
class Scene:
    mesh: TriangleMesh
    interior: Medium
    exterior: Medium = field(default_factory=Medium)
    partition_spec: dict | None = None
    quad: QuadratureRule = field(default_factory=lambda: quadrature_rule(6))
    near_factor: float = NEAR_FACTOR
    exterior_cache: tuple | None = None
    timings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.basis: RwgBasisSet = build_rwg(self.mesh)
        self._blocks: ImpedanceBlocks | None = None
        self._Z: np.ndarray | None = None
        self._G: np.ndarray | None = None
        self._partition: CellPartition | None = None

    @property
    def media(self) -> tuple[Medium, Medium]:
        return self.exterior, self.interior

    @property
    def n(self) -> int:
        """Total unknown count 2 N^J."""
        return 2 * self.basis.n

    @property
    def partition(self) -> CellPartition:
        if self._partition is None:
            spec = dict(self.partition_spec or {"mode": "component"})
            mode = spec.pop("mode", "cube")
            self._partition = partition_cells(self.basis, self.mesh, mode=mode, **spec)
        return self._partition

    @property
    def blocks(self) -> ImpedanceBlocks:
        if self._blocks is None:
            t0 = time.perf_counter()
            self._blocks = assemble_blocks(self.basis, self.media, self.quad, self.exterior_cache, self.near_factor)
            self.timings["assembly"] = time.perf_counter() - t0
        return self._blocks

    def exterior_operators(self) -> tuple[np.ndarray, np.ndarray]:
        """(K1, T1) for reuse by a scene that differs only in its interior medium."""
        return self.blocks.K[0], self.blocks.T[0]

    @property
    def Z(self) -> np.ndarray:
        """K-diagonal system matrix on [M; J]."""
        if self._Z is None:
            self._Z = self.blocks.z("K-diagonal")
        return self._Z

    @property
    def G(self) -> np.ndarray:
        if self._G is None:
            self._G = assemble_gram(self.basis)
        return self._G

    def excitation(self, waves) -> np.ndarray:
        return assemble_excitation(self.basis, waves, self.exterior, quad=self.quad)

    def drop_blocks(self):
        """Free the per-medium matrices once Z has been formed."""
        _ = self.Z
        self._blocks = None
