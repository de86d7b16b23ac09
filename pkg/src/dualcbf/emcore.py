"""Media, plane waves, the Helmholtz kernel and triangle quadrature.

Units are normalised to the exterior wavelength: lambda_1 = 1, so the
free-space wavenumber is 2*pi and the free-space impedance is 1.  The time
convention is exp(+j*omega*t); the outgoing kernel is exp(-j*k*R)/(4*pi*R).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CoincidentPointsError, InvalidParamError

K0 = 2.0 * math.pi
ETA0 = 1.0


@dataclass(frozen=True)
class Medium:
    """Homogeneous medium with relative material constants."""

    eps_r: complex = 1.0
    mu_r: complex = 1.0

    def __post_init__(self):
        if complex(self.eps_r).real <= 0 or complex(self.mu_r).real <= 0:
            raise InvalidParamError(
                f"medium needs Re(eps_r) > 0 and Re(mu_r) > 0, got {self.eps_r}, {self.mu_r}"
            )

    @property
    def k(self) -> complex:
        # principal branch gives Im(k) <= 0 for passive media under exp(+jwt)
        return K0 * cmath.sqrt(complex(self.eps_r) * complex(self.mu_r))

    @property
    def eta(self) -> complex:
        return ETA0 * cmath.sqrt(complex(self.mu_r) / complex(self.eps_r))


VACUUM = Medium()


# ---------------------------------------------------------------------------
# spherical basis
# ---------------------------------------------------------------------------


def spherical_basis(theta_deg: float, phi_deg: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (r_hat, theta_hat, phi_hat) at the given angles in degrees."""
    th = math.radians(theta_deg)
    ph = math.radians(phi_deg)
    st, ct, sp, cp = math.sin(th), math.cos(th), math.sin(ph), math.cos(ph)
    r_hat = np.array([st * cp, st * sp, ct])
    theta_hat = np.array([ct * cp, ct * sp, -st])
    phi_hat = np.array([-sp, cp, 0.0])
    return r_hat, theta_hat, phi_hat


@dataclass(frozen=True)
class PlaneWave:
    """Unit-amplitude plane wave arriving from the direction (theta, phi).

    The wave travels towards the origin, ``k_hat = -r_hat(theta, phi)``, and is
    polarised along ``theta_hat`` or ``phi_hat`` evaluated at (theta, phi).
    """

    theta_deg: float
    phi_deg: float
    pol: str = "theta"
    amplitude: complex = 1.0

    def __post_init__(self):
        if self.pol not in ("theta", "phi"):
            raise InvalidParamError(f"polarisation must be 'theta' or 'phi', got {self.pol!r}")

    @property
    def k_hat(self) -> np.ndarray:
        return -spherical_basis(self.theta_deg, self.phi_deg)[0]

    @property
    def e_hat(self) -> np.ndarray:
        _, th, ph = spherical_basis(self.theta_deg, self.phi_deg)
        return th if self.pol == "theta" else ph


def plane_wave_fields(wave: PlaneWave, medium: Medium, r) -> tuple[np.ndarray, np.ndarray]:
    """Incident E and H at point(s) ``r`` (shape (..., 3))."""
    r = np.asarray(r, dtype=float)
    k_hat = wave.k_hat
    phase = np.exp(-1j * medium.k * (r @ k_hat))
    e = wave.amplitude * phase[..., None] * wave.e_hat
    h = np.cross(k_hat, e) / medium.eta
    return e, h


def direction_grid(
    theta_start: float,
    theta_step: float,
    n_theta: int,
    phi_start: float = 0.0,
    phi_step: float = 0.0,
    n_phi: int = 1,
    pols: Sequence[str] = ("theta", "phi"),
) -> list[PlaneWave]:
    """Waves on a regular (theta, phi) grid; theta outer, phi inner, pol innermost.

    Repeated directions (e.g. several phi values at a pole) are kept, so the
    count is always ``n_theta * n_phi * len(pols)``.
    """
    if n_theta < 1 or n_phi < 1:
        raise InvalidParamError("n_theta and n_phi must be >= 1")
    if not pols:
        raise InvalidParamError("at least one polarisation is required")
    waves = []
    for it in range(n_theta):
        for ip in range(n_phi):
            for pol in pols:
                waves.append(PlaneWave(theta_start + it * theta_step, phi_start + ip * phi_step, pol))
    return waves


# ---------------------------------------------------------------------------
# Green's function
# ---------------------------------------------------------------------------


def green(k: complex, r, r_prime) -> complex:
    """exp(-j k R) / (4 pi R) for R = |r - r'|."""
    dist = float(np.linalg.norm(np.asarray(r, dtype=float) - np.asarray(r_prime, dtype=float)))
    if dist == 0.0:
        raise CoincidentPointsError("Green's function evaluated at coincident points")
    return cmath.exp(-1j * k * dist) / (4.0 * math.pi * dist)


# ---------------------------------------------------------------------------
# quadrature on the reference triangle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric rule in barycentric coordinates; weights sum to one."""

    degree: int
    bary: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def npoints(self) -> int:
        return len(self.weights)

    def points_on(self, verts: np.ndarray) -> np.ndarray:
        """Map to physical points; ``verts`` is (3, 3) or (F, 3, 3)."""
        return np.einsum("qa,...ad->...qd", self.bary, verts)


def _orbit(a: float, b: float, c: float) -> list[tuple[float, float, float]]:
    pts = {(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)}
    return sorted(pts, reverse=True)


def _make_rule(degree: int, groups: Iterable[tuple[tuple[float, float, float], float]]) -> QuadratureRule:
    bary, weights = [], []
    for (a, b, c), w in groups:
        for p in _orbit(a, b, c):
            bary.append(p)
            weights.append(w)
    return QuadratureRule(degree, np.array(bary), np.array(weights))


# Dunavant (1985) symmetric rules
_RULES = {
    1: _make_rule(1, [((1 / 3, 1 / 3, 1 / 3), 1.0)]),
    3: _make_rule(2, [((2 / 3, 1 / 6, 1 / 6), 1 / 3)]),
    6: _make_rule(
        4,
        [
            ((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
            ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322),
        ],
    ),
    12: _make_rule(
        6,
        [
            ((0.501426509658179, 0.249286745170910, 0.249286745170910), 0.116786275726379),
            ((0.873821971016996, 0.063089014491502, 0.063089014491502), 0.050844906370207),
            ((0.053145049844817, 0.310352451033784, 0.636502499121399), 0.082851075618374),
        ],
    ),
}


def quadrature_rule(npoints: int = 6) -> QuadratureRule:
    try:
        return _RULES[npoints]
    except KeyError:
        raise InvalidParamError(f"no triangle rule with {npoints} points; choose from {sorted(_RULES)}") from None
