"""Far fields, monostatic RCS, the Mie oracle and the RMSE metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from .emcore import K0, Medium, QuadratureRule, quadrature_rule, spherical_basis
from .errors import DegenerateRangeError, InvalidParamError, MismatchedSweepError, NonConvergentSeriesError
from .mesh import RwgBasisSet


@dataclass
class RcsPattern:
    """Monostatic cross sections sigma/lambda^2 in dB on an angle list."""

    theta_deg: np.ndarray
    phi_deg: np.ndarray
    pol: list[str]
    rcs_db: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta_deg = np.asarray(self.theta_deg, dtype=float)
        self.phi_deg = np.asarray(self.phi_deg, dtype=float)
        self.rcs_db = np.asarray(self.rcs_db, dtype=float)
        self.pol = list(self.pol)
        if not (len(self.theta_deg) == len(self.phi_deg) == len(self.pol) == len(self.rcs_db)):
            raise InvalidParamError("pattern columns have different lengths")

    def __len__(self) -> int:
        return len(self.rcs_db)

    def rows(self):
        for t, p, pol, r in zip(self.theta_deg, self.phi_deg, self.pol, self.rcs_db):
            yield float(t), float(p), pol, float(r)


def to_db(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(sigma)


# ---------------------------------------------------------------------------
# far field
# ---------------------------------------------------------------------------


def radiation_integrals(j: np.ndarray, basis: RwgBasisSet, k: complex, r_hat: np.ndarray, quad=None):
    """N = int J exp(jk r.r') and L = int M exp(jk r.r') for each direction row of ``r_hat``."""
    quad = quad or quadrature_rule(6)
    mesh = basis.mesh
    n = basis.n
    j = np.asarray(j)
    if j.shape != (2 * n,):
        raise InvalidParamError(f"coefficient vector must have length {2 * n}")
    r_hat = np.atleast_2d(r_hat)
    pts = quad.points_on(mesh.corners)  # (F, q, 3)
    w = quad.weights[None, :] * mesh.areas[:, None]
    rel = pts[:, None] - mesh.corners[:, :, None]  # (F, a, q, 3)
    te = mesh.triangle_edges
    coef = basis.tri_coef
    # per-triangle current samples, (F, q, 3)
    cur_m = np.einsum("fa,faqd->fqd", coef * j[:n][te], rel)
    cur_j = np.einsum("fa,faqd->fqd", coef * j[n:][te], rel)
    phase = np.exp(1j * k * np.einsum("fqd,sd->sfq", pts, r_hat)) * w[None]
    N = np.einsum("sfq,fqd->sd", phase, cur_j)
    L = np.einsum("sfq,fqd->sd", phase, cur_m)
    return N, L


def far_field(j, basis: RwgBasisSet, exterior: Medium, theta_deg, phi_deg, quad: QuadratureRule | None = None):
    """Scattered far-field amplitude (F_theta, F_phi), with E = F exp(-jkr)/r."""
    theta = np.atleast_1d(np.asarray(theta_deg, dtype=float))
    phi = np.broadcast_to(np.atleast_1d(np.asarray(phi_deg, dtype=float)), theta.shape)
    bases = [spherical_basis(t, p) for t, p in zip(theta, phi)]
    r_hat = np.array([b[0] for b in bases])
    th_hat = np.array([b[1] for b in bases])
    ph_hat = np.array([b[2] for b in bases])
    k, eta = exterior.k, exterior.eta
    N, L = radiation_integrals(j, basis, k, r_hat, quad)
    pre = -1j * k / (4.0 * math.pi)
    n_th = np.einsum("sd,sd->s", N, th_hat)
    n_ph = np.einsum("sd,sd->s", N, ph_hat)
    l_th = np.einsum("sd,sd->s", L, th_hat)
    l_ph = np.einsum("sd,sd->s", L, ph_hat)
    f_th = pre * (eta * n_th + l_ph)
    f_ph = pre * (eta * n_ph - l_th)
    if np.ndim(theta_deg) == 0:
        return complex(f_th[0]), complex(f_ph[0])
    return f_th, f_ph


def backscatter_sigma(j, basis, exterior: Medium, theta_deg: float, phi_deg: float, pol: str, quad=None) -> float:
    """sigma/lambda^2 = 4 pi |F_pol|^2 for a unit incident wave (lambda_1 = 1)."""
    f_th, f_ph = far_field(j, basis, exterior, theta_deg, phi_deg, quad)
    f = f_th if pol == "theta" else f_ph
    return 4.0 * math.pi * abs(f) ** 2


# ---------------------------------------------------------------------------
# Mie series
# ---------------------------------------------------------------------------


def mie_terms(x: float) -> int:
    return int(x + 4.0 * x ** (1.0 / 3.0) + 2.0)


def mie_coefficients(x: float, eps_r: complex, mu_r: complex = 1.0, nmax: int | None = None):
    """a_n, b_n from spherical Bessel functions (scipy)."""
    m = np.sqrt(complex(eps_r) * complex(mu_r))
    mt = m / complex(mu_r)
    nmax = nmax or mie_terms(x)
    n = np.arange(1, nmax + 1)
    mx = m * x

    def psi(z):
        return z * spherical_jn(n, z)

    def dpsi(z):
        return spherical_jn(n, z) + z * spherical_jn(n, z, derivative=True)

    h = spherical_jn(n, x) - 1j * spherical_yn(n, x)
    dh = spherical_jn(n, x, derivative=True) - 1j * spherical_yn(n, x, derivative=True)
    xi, dxi = x * h, h + x * dh
    a = (mt * psi(mx) * dpsi(x) - psi(x) * dpsi(mx)) / (mt * psi(mx) * dxi - xi * dpsi(mx))
    b = (psi(mx) * dpsi(x) - mt * psi(x) * dpsi(mx)) / (psi(mx) * dxi - mt * xi * dpsi(mx))
    return a, b


def mie_coefficients_recurrence(x: float, eps_r: complex, mu_r: complex = 1.0, nmax: int | None = None):
    """a_n, b_n via downward logarithmic-derivative and upward Riccati-Bessel recurrences.

    The recurrences are written for exp(-iwt) with outgoing xi = psi - i chi;
    conjugating the material and the result maps them to exp(+jwt).
    """
    m = np.conj(np.sqrt(complex(eps_r) * complex(mu_r)))
    mt = m / np.conj(complex(mu_r))
    nmax = nmax or mie_terms(x)
    mx = m * x
    nstart = int(max(nmax, abs(mx))) + 16
    D = np.zeros(nstart + 1, dtype=complex)
    for nn in range(nstart, 0, -1):
        D[nn - 1] = nn / mx - 1.0 / (D[nn] + nn / mx)
    psi_prev, psi = math.cos(x), math.sin(x)
    chi_prev, chi = -math.sin(x), math.cos(x)
    a = np.zeros(nmax, dtype=complex)
    b = np.zeros(nmax, dtype=complex)
    for nn in range(1, nmax + 1):
        psi_n = (2 * nn - 1) / x * psi - psi_prev
        chi_n = (2 * nn - 1) / x * chi - chi_prev
        xi_n = psi_n - 1j * chi_n
        xi_prev = psi - 1j * chi
        ta = D[nn] / mt + nn / x
        tb = mt * D[nn] + nn / x
        a[nn - 1] = (ta * psi_n - psi) / (ta * xi_n - xi_prev)
        b[nn - 1] = (tb * psi_n - psi) / (tb * xi_n - xi_prev)
        psi_prev, psi = psi, psi_n
        chi_prev, chi = chi, chi_n
    return np.conj(a), np.conj(b)


def mie_backscatter(radius: float, eps_r: complex, mu_r: complex = 1.0, k: float = K0, method: str = "bessel", nmax: int | None = None) -> float:
    """Monostatic sigma/lambda^2 of a homogeneous sphere, lambda = 2 pi / k.

    ``nmax`` overrides the default truncation; a series that has not decayed
    by its last term raises NonConvergentSeriesError.
    """
    if radius <= 0:
        raise InvalidParamError("sphere radius must be positive")
    x = k * radius
    nmax = nmax or mie_terms(x)
    if method == "bessel":
        a, b = mie_coefficients(x, eps_r, mu_r, nmax)
    elif method == "recurrence":
        a, b = mie_coefficients_recurrence(x, eps_r, mu_r, nmax)
    else:
        raise InvalidParamError(f"unknown Mie method {method!r}")
    n = np.arange(1, nmax + 1)
    terms = (2 * n + 1) * (-1.0) ** n * (a - b)
    if not np.all(np.isfinite(terms)):
        raise NonConvergentSeriesError("non-finite Mie coefficient")
    peak = np.abs(terms).max()
    if peak > 0 and abs(terms[-1]) > 1e-4 * peak:
        raise NonConvergentSeriesError(f"Mie terms have not decayed after {nmax} terms")
    # sigma = lambda^2 |sum|^2 / (4 pi)
    return float(abs(terms.sum()) ** 2 / (4.0 * math.pi))


def mie_rcs(radius: float, eps_r: complex, mu_r: complex = 1.0, k: float = K0, thetas=(0.0,), phi_deg: float = 0.0, pol: str = "theta") -> RcsPattern:
    sigma = mie_backscatter(radius, eps_r, mu_r, k)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    return RcsPattern(
        thetas,
        np.full(len(thetas), phi_deg),
        [pol] * len(thetas),
        np.full(len(thetas), to_db(sigma)),
        {"solver": "mie", "radius": radius, "eps_r": str(eps_r), "mu_r": str(mu_r)},
    )


# ---------------------------------------------------------------------------
# RMSE
# ---------------------------------------------------------------------------


def rmse(pattern_c: RcsPattern, pattern_m: RcsPattern) -> float:
    """10 log10( rms(sigma_c - sigma_m) / (max sigma_m - min sigma_m) ), sigma in dB."""
    if (
        len(pattern_c) != len(pattern_m)
        or not np.array_equal(pattern_c.theta_deg, pattern_m.theta_deg)
        or not np.array_equal(pattern_c.phi_deg, pattern_m.phi_deg)
        or pattern_c.pol != pattern_m.pol
    ):
        raise MismatchedSweepError("patterns are sampled on different sweeps")
    c, m = pattern_c.rcs_db, pattern_m.rcs_db
    if np.array_equal(c, m):
        return float("-inf")
    span = float(m.max() - m.min())
    if not span > 0 or not np.isfinite(span):
        raise DegenerateRangeError("reference pattern has zero dynamic range")
    err = math.sqrt(float(np.mean((c - m) ** 2)))
    return 10.0 * math.log10(err / span) if err > 0 else float("-inf")


# ---------------------------------------------------------------------------
# monostatic sweeps
# ---------------------------------------------------------------------------

SOLVERS = ("mom-baseline", "mom-direct", "cbfm-cmp", "cbfm-none")


@dataclass(frozen=True)
class SweepSpec:
    theta_start: float = 0.0
    theta_step: float = 1.0
    n_theta: int = 31
    phi: float = 0.0
    pol: str = "theta"

    def waves(self):
        from .emcore import direction_grid

        return direction_grid(self.theta_start, self.theta_step, self.n_theta, self.phi, 0.0, 1, (self.pol,))


@dataclass
class SweepResult:
    pattern: RcsPattern
    timings: dict
    iterations: list[int]
    converged: list[bool]
    histories: list[list[float]]
    extra: dict = field(default_factory=dict)


def monostatic_rcs(
    scene,
    solver: str,
    sweep: SweepSpec,
    tol: float = 1e-4,
    max_iter: int | None = None,
    cbf_config=None,
    cbf_set=None,
    restart: int | None = None,
    inner_tol: float = 1e-5,
) -> SweepResult:
    """One solve per incidence direction, sigma read back along the same direction.

    CBFs and the reduced matrix are built once and reused for every direction.
    Timings split setup (CBF generation plus reduced-system build, or the LU
    for the direct solver) from the per-direction solves.
    """
    import time

    from .cbfm import build_cbf_set, build_reduced, solve_baseline_mom, solve_cbfm
    from .krylov import LUFactor

    if solver not in SOLVERS:
        raise InvalidParamError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    waves = sweep.waves()
    Z = scene.Z
    t_setup = time.perf_counter()
    extra: dict = {}
    lu = rs = None
    if solver == "mom-direct":
        lu = LUFactor(Z)
    elif solver.startswith("cbfm"):
        if cbf_set is None:
            if cbf_config is None:
                raise InvalidParamError("CBFM solver needs a CBF generation config")
            cbf_set = build_cbf_set(scene.partition, Z, scene.excitation(cbf_config.waves()), scene.G, cbf_config)
        rs = build_reduced(cbf_set, Z, scene.G)
        extra.update(n_cbf=rs.n_cbf, n_cells=cbf_set.partition.n_cells, g_cbf_diagonal=rs.diagonal)
    setup = time.perf_counter() - t_setup
    V = scene.excitation(waves)
    t_iter = time.perf_counter()
    sig, its, conv, hists = [], [], [], []
    inner = {"inner_solves": 0, "inner_max_iterations": 0, "inner_converged": True}
    for col, wave in enumerate(waves):
        v = V[:, col]
        if solver == "mom-direct":
            j = lu.solve(v)
            its.append(0)
            conv.append(True)
            hists.append([])
        elif solver == "mom-baseline":
            j, rep = solve_baseline_mom(Z, v, tol, max_iter, restart)
            its.append(rep.iterations)
            conv.append(rep.converged)
            hists.append(rep.history)
        else:
            j, rep = solve_cbfm(rs, v, tol, max_iter, "cmp" if solver == "cbfm-cmp" else "none", inner_tol)
            its.append(rep.iterations)
            conv.append(rep.converged)
            hists.append(rep.history)
            inner["inner_solves"] += rep.inner_solves
            inner["inner_max_iterations"] = max(inner["inner_max_iterations"], rep.inner_max_iterations)
            inner["inner_converged"] &= rep.inner_converged
        sig.append(backscatter_sigma(j, scene.basis, scene.exterior, wave.theta_deg, wave.phi_deg, wave.pol, scene.quad))
    iter_time = time.perf_counter() - t_iter
    if solver.startswith("cbfm"):
        extra.update(inner)
    pattern = RcsPattern(
        [w.theta_deg for w in waves],
        [w.phi_deg for w in waves],
        [w.pol for w in waves],
        to_db(sig),
        {"solver": solver, "tol": tol},
    )
    timings = {"cbf_gen": setup, "iter": iter_time, "total": setup + iter_time}
    return SweepResult(pattern, timings, its, conv, hists, extra)
