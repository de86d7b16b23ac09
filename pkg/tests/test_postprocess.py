import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcbf.emcore import K0, Medium
from dualcbf.errors import DegenerateRangeError, InvalidParamError, MismatchedSweepError, NonConvergentSeriesError
from dualcbf.mesh import icosphere
from dualcbf.postprocess import (
    RcsPattern,
    SweepSpec,
    far_field,
    mie_backscatter,
    mie_coefficients,
    mie_coefficients_recurrence,
    mie_rcs,
    monostatic_rcs,
    rmse,
    to_db,
)
from dualcbf.scene import Scene

# sigma/lambda^2 of an eps_r = 3 sphere of diameter lambda/3; both series agree to 1e-15
MIE_EPS3_D3_DB = -14.727710216565601


@pytest.fixture(scope="module")
def small_sphere():
    scene = Scene(icosphere(1 / 6, 2), Medium(3.0))
    _ = scene.Z
    return scene


def _pattern(values, thetas=None):
    thetas = np.arange(len(values), dtype=float) if thetas is None else thetas
    return RcsPattern(thetas, np.zeros(len(values)), ["theta"] * len(values), values)


# ---------------------------------------------------------------------------
# far field
# ---------------------------------------------------------------------------


def test_far_field_of_zero_current(small_sphere):
    f = far_field(np.zeros(small_sphere.n), small_sphere.basis, Medium(), 20.0, 30.0)
    assert f == (0, 0)


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False), st.integers(0, 1000))
def test_far_field_linear(alpha, seed):
    scene = Scene(icosphere(1 / 6, 0), Medium(3.0))
    rng = np.random.default_rng(seed)
    n = scene.n
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    th = np.array([0.0, 35.0, 120.0])
    fa = np.array(far_field(a, scene.basis, Medium(), th, 10.0))
    fb = np.array(far_field(b, scene.basis, Medium(), th, 10.0))
    fab = np.array(far_field(a + alpha * b, scene.basis, Medium(), th, 10.0))
    np.testing.assert_allclose(fab, fa + alpha * fb, rtol=1e-10, atol=1e-12 * np.abs(fa).max())


def test_far_field_rejects_wrong_length(small_sphere):
    with pytest.raises(InvalidParamError):
        far_field(np.zeros(7), small_sphere.basis, Medium(), 0.0, 0.0)


def test_far_field_dipole_pattern():
    # a single RWG electric current radiates like a short dipole: no field along its axis
    scene = Scene(icosphere(1 / 20, 1), Medium(3.0))
    n = scene.basis.n
    j = np.zeros(2 * n, dtype=complex)
    j[n] = 1.0
    basis = scene.basis
    e = basis.mesh
    # the RWG dipole moment lies along the line joining the two free vertices
    tp, tm = basis.tri_plus[0], basis.tri_minus[0]
    moment = e.centroids[tm] - e.centroids[tp]
    moment /= np.linalg.norm(moment)
    theta = math.degrees(math.acos(moment[2]))
    phi = math.degrees(math.atan2(moment[1], moment[0]))
    f_axis = np.abs(far_field(j, basis, Medium(), theta, phi))
    side = np.cross(moment, [0.3, -0.5, 0.8])
    side /= np.linalg.norm(side)
    f_side = np.abs(far_field(j, basis, Medium(), math.degrees(math.acos(side[2])), math.degrees(math.atan2(side[1], side[0]))))
    assert f_axis.max() < 0.05 * f_side.max()


# ---------------------------------------------------------------------------
# Mie oracle
# ---------------------------------------------------------------------------


def test_mie_no_contrast():
    assert mie_backscatter(1 / 6, 1.0) == 0.0
    pat = mie_rcs(1 / 6, 1.0, thetas=[0, 10])
    assert np.all(np.isneginf(pat.rcs_db))


def test_mie_pinned_reference():
    val = to_db(mie_backscatter(1 / 6, 3.0))
    assert val == pytest.approx(MIE_EPS3_D3_DB, abs=1e-10)


@pytest.mark.parametrize(
    "radius, eps",
    [(1 / 6, 3.0), (0.5, 4.0), (1.0, 2.0), (1.0, 2.0 - 0.01j), (0.2, 2.0 - 0.1j), (1.0, 4.0 - 1.0j), (0.8, 6.0)],
)
def test_mie_two_implementations_agree(radius, eps):
    a = mie_backscatter(radius, eps)
    b = mie_backscatter(radius, eps, method="recurrence")
    assert abs(a - b) <= 1e-10 * a
    x = K0 * radius
    ca, cb = mie_coefficients(x, eps), mie_coefficients_recurrence(x, eps)
    np.testing.assert_allclose(ca[0], cb[0], rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(ca[1], cb[1], rtol=1e-9, atol=1e-14)


def test_mie_loss_reduces_backscatter():
    assert mie_backscatter(1.0, 2.0 - 0.01j) < mie_backscatter(1.0, 2.0)


def test_mie_rayleigh_slope():
    # sigma ~ x^4 a^2: the log-log slope of sigma / a^2 against x is 4
    xs = np.array([0.01, 0.02, 0.04])
    a = xs / K0
    s = np.array([mie_backscatter(r, 3.0) for r in a]) / a**2
    slopes = np.diff(np.log(s)) / np.diff(np.log(xs))
    np.testing.assert_allclose(slopes, 4.0, rtol=0.02)


def test_mie_rayleigh_limit_value():
    # sigma = 4 pi k^4 a^6 |(eps-1)/(eps+2)|^2 with lambda = 1
    a = 1e-3
    expected = 4 * math.pi * K0**4 * a**6 * (2 / 5) ** 2
    assert mie_backscatter(a, 3.0) == pytest.approx(expected, rel=1e-5)


def test_mie_truncation_failure():
    with pytest.raises(NonConvergentSeriesError):
        mie_backscatter(1.0, 3.0, nmax=2)


def test_mie_rejects():
    with pytest.raises(InvalidParamError):
        mie_backscatter(0.0, 3.0)
    with pytest.raises(InvalidParamError):
        mie_backscatter(0.2, 3.0, method="tmatrix")


def test_mie_rcs_shape():
    pat = mie_rcs(1 / 6, 3.0, thetas=np.arange(0, 31.0))
    assert len(pat) == 31
    assert np.all(pat.rcs_db == pat.rcs_db[0])


# ---------------------------------------------------------------------------
# RMSE
# ---------------------------------------------------------------------------


def test_rmse_identical():
    p = _pattern(np.linspace(-10, 10, 11))
    assert rmse(p, p) == float("-inf")


def test_rmse_uniform_offset():
    m = _pattern(np.linspace(-10, 10, 21))
    c = _pattern(m.rcs_db + 1.0)
    assert rmse(c, m) == pytest.approx(10 * math.log10(1 / 20), abs=1e-12)
    assert rmse(c, m) == pytest.approx(-13.0103, abs=1e-4)


def test_rmse_formula_matches_direct_evaluation():
    rng = np.random.default_rng(3)
    m = rng.uniform(-30, 5, 31)
    c = m + rng.normal(0, 0.2, 31)
    ref = 10 * math.log10(math.sqrt(np.mean((c - m) ** 2)) / (m.max() - m.min()))
    assert rmse(_pattern(c), _pattern(m)) == pytest.approx(ref, abs=1e-12)


def test_rmse_mismatch_and_degenerate():
    with pytest.raises(MismatchedSweepError):
        rmse(_pattern(np.zeros(3)), _pattern(np.zeros(4)))
    with pytest.raises(MismatchedSweepError):
        rmse(_pattern(np.ones(3), np.array([0.0, 1, 2])), _pattern(np.ones(3), np.array([0.0, 2, 4])))
    with pytest.raises(DegenerateRangeError):
        rmse(_pattern(np.ones(4)), _pattern(np.zeros(4)))


def test_pattern_columns_checked():
    with pytest.raises(InvalidParamError):
        RcsPattern([0, 1], [0], ["theta"], [1.0])


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def test_single_direction_sweep(small_sphere):
    res = monostatic_rcs(small_sphere, "mom-direct", SweepSpec(0.0, 1.0, 1))
    assert len(res.pattern) == 1
    assert set(res.timings) == {"cbf_gen", "iter", "total"}


def test_sphere_pattern_is_flat(small_sphere):
    res = monostatic_rcs(small_sphere, "mom-direct", SweepSpec(0.0, 15.0, 13, phi=20.0))
    spread = res.pattern.rcs_db.max() - res.pattern.rcs_db.min()
    assert spread < 0.1


def test_unknown_solver(small_sphere):
    with pytest.raises(InvalidParamError):
        monostatic_rcs(small_sphere, "fmm", SweepSpec(0.0, 1.0, 1))
    with pytest.raises(InvalidParamError):
        monostatic_rcs(small_sphere, "cbfm-cmp", SweepSpec(0.0, 1.0, 1))


def test_sweep_spec_directions():
    assert [w.theta_deg for w in SweepSpec(0.0, 0.5, 91).waves()][-1] == 45.0
    assert len(SweepSpec(0.0, 1.0, 91).waves()) == 91
