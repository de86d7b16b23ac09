"""Characteristic basis functions with dual electric/magnetic pairs.

Current sets are stored per cell as J_m = [J_m^M; J_m^J] (rows: the cell's
edges for M, then the same edges for J).  Global vectors follow the
K-diagonal ordering [alpha^M; alpha^J].
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .emcore import PlaneWave, direction_grid
from .errors import BreakdownError, DimensionMismatchError, InnerSolveFailure, InvalidParamError, RankZeroError
from .krylov import LinearOperator, LUFactor, SolveReport, diagonal_operator, gmres
from .mesh import CellPartition
from .operators import swap_halves

log = logging.getLogger(__name__)

INNER_TOL = 1e-5
DIAGONAL_FLAG_TOL = 1e-12


def group_count(l: int) -> int:
    """Number of singular values in groups 1..l: sum of 2(2l'+1)."""
    return 2 * l * (l + 2)


@dataclass(frozen=True)
class CbfGenerationConfig:
    generator: str = "primary"  # primary | ipcbf-gmres | ipcbf-jacobi
    theta_start: float = 0.0
    theta_step: float = 30.0
    n_theta: int = 12
    phi_start: float = 0.0
    phi_step: float = 30.0
    n_phi: int = 6
    pols: tuple[str, ...] = ("theta", "phi")
    delta_r: float = 1e-3
    delta_svd: float | None = 1e-3
    group_l: int | None = None
    jacobi_p: int = 2
    max_iter: int = 1000

    def __post_init__(self):
        if self.generator not in ("primary", "ipcbf-gmres", "ipcbf-jacobi"):
            raise InvalidParamError(f"unknown CBF generator {self.generator!r}")
        if not 0 < self.delta_r < 1:
            raise InvalidParamError("delta_r must lie in (0, 1)")
        if (self.delta_svd is None) == (self.group_l is None):
            raise InvalidParamError("exactly one of delta_svd and group_l selects truncation")
        if self.delta_svd is not None and not 0 < self.delta_svd < 1:
            raise InvalidParamError("delta_svd must lie in (0, 1)")
        if self.group_l is not None and self.group_l < 1:
            raise InvalidParamError("group_l must be >= 1")
        if self.jacobi_p < 1:
            raise InvalidParamError("jacobi_p must be >= 1")
        object.__setattr__(self, "pols", tuple(self.pols))

    def waves(self) -> list[PlaneWave]:
        return direction_grid(
            self.theta_start, self.theta_step, self.n_theta, self.phi_start, self.phi_step, self.n_phi, self.pols
        )


def _cell_rows(cell: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([cell, cell + n])


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def generate_primary(partition: CellPartition, Z: np.ndarray, V: np.ndarray) -> list[np.ndarray]:
    """Solve Z_mm J_m = V_m for every cell with one LU each."""
    n = Z.shape[0] // 2
    if V.shape[0] != 2 * n:
        raise DimensionMismatchError("excitation rows do not match Z")
    out = []
    for m, cell in enumerate(partition.cells):
        rows = _cell_rows(cell, n)
        lu = LUFactor(Z[np.ix_(rows, rows)], cell=m)
        out.append(lu.solve(V[rows]))
    return out


def tdiag_operator(Z: np.ndarray) -> tuple[LinearOperator, np.ndarray]:
    """T-diagonal action on [J; M] without copying Z, and its diagonal."""
    n = Z.shape[0] // 2
    op = LinearOperator(2 * n, lambda y: Z @ swap_halves(y))
    diag = np.concatenate([np.diagonal(Z[:n, n:]), np.diagonal(Z[n:, :n])])
    return op, diag


def solve_baseline_mom(
    Z: np.ndarray, v: np.ndarray, tol: float = 1e-4, max_iter: int | None = None, restart: int | None = None
) -> tuple[np.ndarray, SolveReport]:
    """Diagonally preconditioned GMRES on the T-diagonal arrangement.

    ``Z`` is the K-diagonal matrix; the returned coefficients are in the
    [alpha^M; alpha^J] order.
    """
    op, diag = tdiag_operator(Z)
    if np.any(diag == 0):
        raise InvalidParamError("T-diagonal matrix has a zero diagonal entry")
    rep = gmres(op, v, tol, max_iter, diagonal_operator(1.0 / diag), restart=restart)
    return swap_halves(rep.x), rep


def generate_ipcbf(
    partition: CellPartition,
    Z: np.ndarray,
    V: np.ndarray,
    delta_r: float,
    max_iter: int = 1000,
    method: str = "gmres",
    p: int = 2,
) -> list[np.ndarray]:
    """Improved primary CBFs from loosely converged global solves.

    ``method='gmres'`` solves the full T-diagonal system for each wave to
    relative residual ``delta_r`` and restricts the result to each cell.
    ``method='jacobi'`` runs ``p`` block-Jacobi sweeps from a zero start.
    """
    n = Z.shape[0] // 2
    if method == "gmres":
        sol = np.zeros(V.shape, dtype=np.complex128)
        for col in range(V.shape[1]):
            x, rep = solve_baseline_mom(Z, V[:, col], delta_r, max_iter)
            if not rep.converged:
                log.warning("IPCBF generation for wave %d stopped at residual %.3e", col, rep.final_residual)
            sol[:, col] = x
        return [sol[_cell_rows(c, n)] for c in partition.cells]
    if method != "jacobi":
        raise InvalidParamError(f"unknown IPCBF method {method!r}")
    lus = [LUFactor(Z[np.ix_(_cell_rows(c, n), _cell_rows(c, n))], cell=m) for m, c in enumerate(partition.cells)]
    full = np.zeros(V.shape, dtype=np.complex128)
    for _ in range(p):
        coupled = Z @ full
        nxt = np.zeros_like(full)
        for cell, lu in zip(partition.cells, lus):
            rows = _cell_rows(cell, n)
            # V_m - sum_{n != m} Z_mn J_n
            rhs = V[rows] - coupled[rows] + Z[np.ix_(rows, rows)] @ full[rows]
            nxt[rows] = lu.solve(rhs)
        full = nxt
    return [full[_cell_rows(c, n)] for c in partition.cells]


# ---------------------------------------------------------------------------
# dual orthogonalisation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellCbf:
    CM: np.ndarray
    CJ: np.ndarray
    sigma: np.ndarray  # kept singular values, descending
    sigma_all: np.ndarray  # full spectrum before truncation

    @property
    def L(self) -> int:
        return len(self.sigma)


def orthogonalize_dual(
    JM: np.ndarray,
    JJ: np.ndarray,
    G: np.ndarray,
    delta_svd: float | None = None,
    group_l: int | None = None,
) -> CellCbf:
    """SVD of G' = JM^H G JJ, keeping singular vectors above the threshold."""
    if JM.shape != JJ.shape or G.shape != (JM.shape[0], JM.shape[0]):
        raise DimensionMismatchError("current sets and Gram matrix are inconsistent")
    if (delta_svd is None) == (group_l is None):
        raise InvalidParamError("exactly one of delta_svd and group_l selects truncation")
    Gp = JM.conj().T @ (G @ JJ)
    U, s, Vh = np.linalg.svd(Gp)
    if s.size == 0 or s[0] == 0.0:
        raise RankZeroError("all singular values vanish")
    if delta_svd is not None:
        L = int(np.count_nonzero(s / s[0] >= delta_svd))
    else:
        L = min(group_count(group_l), len(s))
    if L == 0:
        raise RankZeroError("no singular value above the threshold")
    return CellCbf(JM @ U[:, :L], JJ @ Vh[:L].conj().T, s[:L].copy(), s.copy())


@dataclass(frozen=True, eq=False)
class CbfSet:
    partition: CellPartition
    cells: tuple[CellCbf, ...]
    generation_time: float = 0.0

    @property
    def L(self) -> np.ndarray:
        return np.array([c.L for c in self.cells])

    @property
    def n_cbf(self) -> int:
        return 2 * int(self.L.sum())

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.L)])

    def duality_residual(self, G: np.ndarray) -> float:
        """max |off-diagonal| of (C^M)^H G_m C^J relative to sigma_max, over all cells."""
        worst = 0.0
        for cell, cb in zip(self.partition.cells, self.cells):
            D = cb.CM.conj().T @ G[np.ix_(cell, cell)] @ cb.CJ
            off = D - np.diag(np.diag(D))
            worst = max(worst, float(np.abs(off).max(initial=0.0)) / cb.sigma[0])
        return worst

    def spectra_rows(self):
        for m, cb in enumerate(self.cells):
            s = cb.sigma_all
            for i, val in enumerate(s):
                yield m, i, float(val), float(val / s[0])


def generate_current_sets(partition: CellPartition, Z: np.ndarray, V: np.ndarray, config: CbfGenerationConfig):
    if config.generator == "primary":
        return generate_primary(partition, Z, V)
    if config.generator == "ipcbf-gmres":
        return generate_ipcbf(partition, Z, V, config.delta_r, config.max_iter, "gmres")
    return generate_ipcbf(partition, Z, V, config.delta_r, config.max_iter, "jacobi", config.jacobi_p)


def build_cbf_set(
    partition: CellPartition,
    Z: np.ndarray,
    V: np.ndarray,
    G: np.ndarray,
    config: CbfGenerationConfig,
    current_sets: list[np.ndarray] | None = None,
) -> CbfSet:
    """Generate current sets for every cell and orthogonalise them into dual CBFs.

    Pass ``current_sets`` (from :func:`generate_current_sets`) to re-truncate
    existing currents without repeating the generation solves.
    """
    t0 = time.perf_counter()
    sets = generate_current_sets(partition, Z, V, config) if current_sets is None else current_sets
    cells = []
    for cell, J in zip(partition.cells, sets):
        nm = len(cell)
        cells.append(
            orthogonalize_dual(J[:nm], J[nm:], G[np.ix_(cell, cell)], config.delta_svd, config.group_l)
        )
    return CbfSet(partition, tuple(cells), time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# reduced system
# ---------------------------------------------------------------------------


def _block_expansion(cbf: CbfSet, n: int, which: str) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    off = cbf.offsets
    for m, (cell, cb) in enumerate(zip(cbf.partition.cells, cbf.cells)):
        C = cb.CM if which == "M" else cb.CJ
        r, c = np.meshgrid(cell, np.arange(cb.L) + off[m], indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(C.ravel())
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, int(off[-1]))
    )


@dataclass(eq=False)
class ReducedSystem:
    cbf: CbfSet
    C_JM: sp.csr_matrix
    C_MJ: sp.csr_matrix
    R: np.ndarray
    G_cbf: sp.csr_matrix
    d_cbf: np.ndarray
    diagonal: bool
    build_time: float = 0.0

    @property
    def n_cbf(self) -> int:
        return self.R.shape[0]

    def project(self, v: np.ndarray) -> np.ndarray:
        return self.C_JM.conj().T @ v

    def expand(self, jc: np.ndarray) -> np.ndarray:
        return self.C_MJ @ jc


def cbf_gram(cbf: CbfSet, G: np.ndarray) -> tuple[np.ndarray, bool]:
    """Dense G^CBF = (C^JM)^H diag(G, G) C^MJ and whether it is diagonal.

    G is real antisymmetric, so for cells that are whole closed components the
    top-left block is -diag(Sigma_L) and the bottom-right block diag(Sigma_L).
    """
    n = G.shape[0]
    CM = _block_expansion(cbf, n, "M")
    CJ = _block_expansion(cbf, n, "J")
    h = cbf.n_cbf // 2
    G_dense = np.zeros((2 * h, 2 * h), dtype=np.complex128)
    G_dense[:h, :h] = CJ.conj().T @ (CM.T @ G.T).T
    G_dense[h:, h:] = CM.conj().T @ (CJ.T @ G.T).T
    sig_max = max(float(c.sigma[0]) for c in cbf.cells)
    offd = G_dense - np.diag(np.diag(G_dense))
    return G_dense, bool(np.abs(offd).max(initial=0.0) < DIAGONAL_FLAG_TOL * sig_max)


def build_reduced(cbf: CbfSet, Z: np.ndarray, G: np.ndarray) -> ReducedSystem:
    """Form (C^JM)^H Z C^MJ and G^CBF = (C^JM)^H diag(G, G) C^MJ."""
    t0 = time.perf_counter()
    n = Z.shape[0] // 2
    if Z.shape != (2 * n, 2 * n) or G.shape != (n, n):
        raise DimensionMismatchError(f"Z {Z.shape} and G {G.shape} are inconsistent")
    if int(np.concatenate(cbf.partition.cells).max()) >= n:
        raise DimensionMismatchError("partition refers to edges beyond Z")
    CM = _block_expansion(cbf, n, "M")
    CJ = _block_expansion(cbf, n, "J")
    C_JM = sp.block_diag([CJ, CM], format="csr")
    C_MJ = sp.block_diag([CM, CJ], format="csr")
    ZC = (C_MJ.T @ Z.T).T
    R = np.asarray(C_JM.conj().T @ ZC)
    G_dense, diagonal = cbf_gram(cbf, G)
    G_sparse = sp.csr_matrix(G_dense)
    G_sparse.eliminate_zeros()
    d = 1.0 / np.diag(G_dense)
    return ReducedSystem(cbf, C_JM, C_MJ, R, G_sparse, d, diagonal, time.perf_counter() - t0)


@dataclass
class CbfmReport(SolveReport):
    inner_solves: int = 0
    inner_max_iterations: int = 0
    inner_converged: bool = True


def solve_cbfm(
    rs: ReducedSystem,
    v: np.ndarray,
    tol: float = 1e-4,
    max_iter: int | None = None,
    precond: str = "cmp",
    inner_tol: float = INNER_TOL,
) -> tuple[np.ndarray, CbfmReport]:
    """Outer GMRES on R (G^CBF)^-1 y = (C^JM)^H v; returns RWG coefficients [alpha^M; alpha^J].

    ``precond='none'`` solves R j^CBF = (C^JM)^H v without the Gram preconditioner.
    """
    rhs = rs.project(v)
    stats = {"count": 0, "max_it": 0, "ok": True}
    if precond == "none":
        minv = None
    elif precond != "cmp":
        raise InvalidParamError(f"unknown CBFM preconditioner {precond!r}")
    elif rs.diagonal:
        minv = diagonal_operator(rs.d_cbf)
    else:
        G = rs.G_cbf
        inner_op = LinearOperator(rs.n_cbf, lambda x: G @ x)
        inner_pc = diagonal_operator(rs.d_cbf)

        def apply_inverse(y):
            try:
                rep = gmres(inner_op, y, inner_tol, rs.n_cbf, inner_pc)
            except BreakdownError as exc:
                raise InnerSolveFailure(f"inner G^CBF solve broke down: {exc}") from None
            stats["count"] += 1
            stats["max_it"] = max(stats["max_it"], rep.iterations)
            if not rep.converged:
                stats["ok"] = False
                raise InnerSolveFailure(
                    f"inner G^CBF solve stalled at {rep.final_residual:.3e} after {rep.iterations} iterations"
                )
            return rep.x

        minv = LinearOperator(rs.n_cbf, apply_inverse)
    rep = gmres(rs.R, rhs, tol, max_iter, minv)
    out = CbfmReport(
        rep.x, rep.history, rep.iterations, rep.converged, rep.wall_time, rep.true_residual,
        stats["count"], stats["max_it"], stats["ok"],
    )
    return rs.expand(rep.x), out
