"""GMRES with right preconditioning and a multi-RHS dense LU."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import BreakdownError, DimensionMismatchError, InvalidParamError, SingularMatrixError

REORTH_THRESHOLD = 1e-8


@dataclass(frozen=True)
class LinearOperator:
    """Square linear map given by its action on vectors."""

    n: int
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.apply(x)

    def __matmul__(self, x):
        return self.apply(x)


def as_operator(A) -> LinearOperator:
    if isinstance(A, LinearOperator):
        return A
    if callable(A) and not isinstance(A, np.ndarray):
        raise InvalidParamError("wrap bare callables in LinearOperator to give their dimension")
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"operator must be square, got shape {A.shape}")
    return LinearOperator(A.shape[0], lambda x: A @ x)


def diagonal_operator(d: np.ndarray) -> LinearOperator:
    d = np.asarray(d)
    return LinearOperator(len(d), lambda x: d * x)


@dataclass
class SolveReport:
    x: np.ndarray
    history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    true_residual: float = float("nan")

    @property
    def final_residual(self) -> float:
        return self.history[-1] if self.history else float("nan")


def gmres(
    A,
    b: np.ndarray,
    tol: float = 1e-6,
    max_iter: int | None = None,
    right_precond=None,
    restart: int | None = None,
    x0: np.ndarray | None = None,
) -> SolveReport:
    """Solve A x = b by GMRES on A M^-1 y = b, x = M^-1 y.

    ``right_precond`` is the action of M^-1.  The history holds the relative
    residual ||b - A x_k|| / ||b|| estimated from the Hessenberg least-squares
    problem, starting with the initial residual at iteration 0.
    """
    t0 = time.perf_counter()
    op = as_operator(A)
    b = np.asarray(b)
    if b.ndim != 1 or len(b) != op.n or op.n == 0:
        raise DimensionMismatchError(f"rhs of length {b.shape} does not match operator of size {op.n}")
    if not tol > 0:
        raise InvalidParamError("tol must be positive")
    n = op.n
    max_iter = n if max_iter is None else int(max_iter)
    m_inv = (lambda v: v) if right_precond is None else as_operator(right_precond).apply
    dtype = np.result_type(b.dtype, np.complex128)
    bnorm = float(np.linalg.norm(b))
    x = np.zeros(n, dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)
    if bnorm == 0.0:
        return SolveReport(np.zeros(n, dtype=dtype), [0.0], 0, True, time.perf_counter() - t0, 0.0)

    r = b - op.apply(x) if x0 is not None else b.astype(dtype)
    history = [float(np.linalg.norm(r)) / bnorm]
    total = 0
    converged = history[0] <= tol
    cycle = max_iter if restart is None else max(1, int(restart))
    while not converged and total < max_iter:
        beta = float(np.linalg.norm(r))
        m = min(cycle, max_iter - total)
        V = np.zeros((m + 1, n), dtype=dtype)
        H = np.zeros((m + 1, m), dtype=dtype)
        cs = np.zeros(m, dtype=dtype)
        sn = np.zeros(m, dtype=dtype)
        g = np.zeros(m + 1, dtype=dtype)
        g[0] = beta
        V[0] = r / beta
        j_done = 0
        for j in range(m):
            w = op.apply(m_inv(V[j])).astype(dtype, copy=False)
            wnorm0 = np.linalg.norm(w)
            for i in range(j + 1):
                h = np.vdot(V[i], w)
                H[i, j] = h
                w = w - h * V[i]
            hnext = np.linalg.norm(w)
            if hnext > 0:
                loss = np.abs(V[: j + 1].conj() @ (w / hnext)).max()
                if loss > REORTH_THRESHOLD:
                    for i in range(j + 1):
                        h = np.vdot(V[i], w)
                        H[i, j] += h
                        w = w - h * V[i]
                    hnext = np.linalg.norm(w)
            H[j + 1, j] = hnext
            # apply previous rotations, then a new one annihilating H[j+1, j]
            for i in range(j):
                tmp = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = tmp
            a, c = H[j, j], H[j + 1, j]
            denom = np.sqrt(abs(a) ** 2 + abs(c) ** 2)
            if denom == 0:
                raise BreakdownError(f"zero Hessenberg column at iteration {total + j + 1}")
            if a == 0:
                cs[j], sn[j] = 0.0, 1.0
            else:
                cs[j] = abs(a) / denom
                sn[j] = (a / abs(a)) * np.conj(c) / denom
            H[j, j] = cs[j] * a + sn[j] * c
            H[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            rel = float(abs(g[j + 1])) / bnorm
            history.append(rel)
            j_done = j + 1
            if rel <= tol:
                converged = True
                break
            if hnext <= 1e-14 * max(wnorm0, 1e-300):
                raise BreakdownError(
                    f"Krylov space exhausted at iteration {total + j + 1} with residual {rel:.3e}"
                )
            V[j + 1] = w / hnext
        y = sla.solve_triangular(H[:j_done, :j_done], g[:j_done])
        x = x + m_inv(V[:j_done].T @ y)
        total += j_done
        if not converged and total < max_iter:
            r = b - op.apply(x)
    true_rel = float(np.linalg.norm(b - op.apply(x))) / bnorm
    return SolveReport(x, history, total, converged, time.perf_counter() - t0, true_rel)


class LUFactor:
    """Partial-pivoting LU of a square matrix, reusable for many right-hand sides."""

    def __init__(self, A: np.ndarray, cell: int | None = None):
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatchError(f"LU needs a square matrix, got {A.shape}")
        scale = float(np.abs(A).sum(axis=0).max()) if A.size else 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            self.lu, self.piv = sla.lu_factor(A, check_finite=True)
        pivots = np.abs(np.diag(self.lu))
        if scale == 0.0 or pivots.min() < 1e-14 * scale:
            where = "" if cell is None else f" in cell {cell}"
            raise SingularMatrixError(f"matrix is singular to working precision{where}", cell=cell)
        self.n = A.shape[0]

    def solve(self, B: np.ndarray) -> np.ndarray:
        B = np.asarray(B)
        if B.shape[0] != self.n:
            raise DimensionMismatchError(f"rhs has {B.shape[0]} rows, matrix has {self.n}")
        return sla.lu_solve((self.lu, self.piv), B)


def lu_factor_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for all columns of B from one factorisation."""
    return LUFactor(A).solve(B)
