import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magnls.errors import ConvergenceError, DomainError, SolverError
from magnls.limit2d import (
    ConcentrationFunctionHandle,
    concentration_M,
    gauge_transform,
    ground_energy,
    minimize_M,
    planar_limit_energy,
    solve_limit_ground_state,
    unit_ground_state,
)
from magnls.potentials import ConcentrationDomain, CylMagneticPotential, ScalarPotential

# Fourier gradient-flow value on a 512^2 periodic box of side 30 (tests/oracles.py),
# frozen before the shooting solver was run against it.
E01_ORACLE = 5.8504482622870055

EXAMPLE_V = ScalarPotential("cylindrical-hardy", (1.0, 2.0), alpha_inf=2.0)
EXAMPLE_DOM = ConcentrationDomain(0.5, 2.0, 0.5)


@pytest.fixture(scope="module")
def gs1():
    return unit_ground_state(4.0)


def test_energy_matches_oracle(gs1):
    assert abs(gs1.energy - E01_ORACLE) <= 1e-3 * E01_ORACLE
    # the shooting value is in fact far more accurate than required
    assert abs(gs1.energy - E01_ORACLE) <= 1e-9 * E01_ORACLE


def test_profile_invariants(gs1):
    assert np.all(gs1.w > 0)
    assert np.all(np.diff(gs1.w) < 0)
    assert gs1.dw[0] == 0.0
    assert gs1.w[-1] < 1e-6 * gs1.w0
    assert gs1.nehari_defect() < 1e-8
    assert gs1.ode_residual() < 1e-5


def test_nehari_energy_identity(gs1):
    from scipy.integrate import simpson

    alt = (0.5 - 0.25) * 2 * np.pi * simpson(gs1.w**4 * gs1.r, x=gs1.r)
    assert ground_energy(gs1) == pytest.approx(alt, rel=1e-8)


def test_scaling_exactness(gs1):
    direct = solve_limit_ground_state(2.0, 4.0)
    scaled = gs1.rescaled(2.0)
    r = np.linspace(0.0, 8.0, 401)
    assert np.max(np.abs(direct(r) - scaled(r))) <= 1e-7 * direct.w0
    assert direct.energy == pytest.approx(2.0 * gs1.energy, rel=1e-8)


@pytest.mark.parametrize("a0", [0.5, 2.0])
def test_energy_scaling_p4(gs1, a0):
    ea = solve_limit_ground_state(a0, 4.0).energy
    assert abs(ea - a0 * gs1.energy) <= 1e-3 * gs1.energy


@pytest.mark.parametrize("p", [3.0, 6.0])
def test_energy_scaling_general_p(p):
    e1 = solve_limit_ground_state(1.0, p).energy
    e3 = solve_limit_ground_state(3.0, p).energy
    assert e3 == pytest.approx(3.0 ** (2 / (p - 2)) * e1, rel=1e-6)


def test_tail_is_bessel(gs1):
    from scipy.special import k0

    r = np.array([25.0, 30.0])
    np.testing.assert_allclose(gs1(r), gs1.tail_B * k0(r), rtol=1e-15)
    assert gs1(np.array([gs1.r_match]))[0] == pytest.approx(
        gs1.tail_B * k0(gs1.r_match), rel=1e-10)


def test_limit_errors():
    with pytest.raises(DomainError):
        solve_limit_ground_state(0.0, 4.0)
    with pytest.raises(DomainError):
        solve_limit_ground_state(1.0, 2.0)
    with pytest.raises(SolverError):
        solve_limit_ground_state(1.0, 4.0, max_doublings=0)
    with pytest.raises(ConvergenceError) as exc:
        solve_limit_ground_state(1.0, 4.0, tol=1e-30)
    assert exc.value.result > 0


# ---------------------------------------------------------------- gauge

def _planar_mesh(n, L=12.0):
    y = np.linspace(-L / 2, L / 2, n)
    h = y[1] - y[0]
    Y1, Y2 = np.meshgrid(y, y, indexing="ij")
    return Y1, Y2, h


def test_gauge_identity_and_modulus(gs1, rng):
    Y1, Y2, _ = _planar_mesh(33)
    u = gs1(np.hypot(Y1, Y2)) * np.exp(1j * rng.uniform(0, 6, Y1.shape))
    np.testing.assert_array_equal(gauge_transform(u, (0.0, 0.0), Y1, Y2), u)
    g = gauge_transform(u, (0.7, -1.3), Y1, Y2)
    np.testing.assert_allclose(np.abs(g), np.abs(u), rtol=1e-15)
    back = gauge_transform(g, (0.7, -1.3), Y1, Y2, direction="remove")
    np.testing.assert_allclose(back, u, atol=1e-14)
    with pytest.raises(ValueError):
        gauge_transform(u, (1, 1), Y1, Y2, direction="sideways")


def test_gauge_energy_second_order(gs1):
    A0 = (0.6, -0.4)
    diffs = []
    for n in (61, 121, 241):
        Y1, Y2, h = _planar_mesh(n)
        w = gs1(np.hypot(Y1, Y2))
        e0 = planar_limit_energy(w, h, (0.0, 0.0), 1.0, 4.0)
        e1 = planar_limit_energy(gauge_transform(w, A0, Y1, Y2), h, A0, 1.0, 4.0)
        diffs.append(abs(e1 - e0))
    ratios = [diffs[0] / diffs[1], diffs[1] / diffs[2]]
    assert all(3.5 < q < 4.5 for q in ratios), ratios


# ---------------------------------------------------------------- concentration function

def test_M_example_normalized():
    M = ConcentrationFunctionHandle(V=EXAMPLE_V, c=CylMagneticPotential.constant_field(1.0).c,
                                    p=4.0, normalization="normalized")
    assert concentration_M(M, 1.0, 0.0) == pytest.approx(1.25, rel=1e-15)
    rho = np.linspace(0.3, 3, 11)
    np.testing.assert_allclose(M(rho, 0.0 * rho), rho * (rho**2 / 4 + rho**-2), rtol=1e-14)


def test_M_zero_field_linear(e01):
    M = ConcentrationFunctionHandle(V=ScalarPotential("constant", (1.0,)),
                                    c=CylMagneticPotential.zero().c, p=4.0)
    rho = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(M(rho, 0.3 + 0 * rho), 2 * np.pi * rho * e01, rtol=1e-14)


@pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
def test_M_scaling_in_coefficient(p):
    M1 = ConcentrationFunctionHandle(V=ScalarPotential("constant", (0.5,)),
                                     c=CylMagneticPotential.constant_field(1.0).c, p=p, e01=1.0)
    M4 = ConcentrationFunctionHandle(V=ScalarPotential("constant", (2.0,)),
                                     c=CylMagneticPotential.constant_field(2.0).c, p=p, e01=1.0)
    rho = np.linspace(0.5, 2.0, 7)
    np.testing.assert_allclose(M4(rho, 0 * rho), 4 ** (2 / (p - 2)) * M1(rho, 0 * rho),
                               rtol=1e-13)


def test_M_nonpositive_coefficient_raises():
    M = ConcentrationFunctionHandle(V=ScalarPotential("constant", (0.0,)),
                                    c=CylMagneticPotential.zero().c, p=4.0, e01=1.0)
    with pytest.raises(DomainError):
        M(1.0, 0.0)


@settings(max_examples=50)
@given(v1=st.floats(0.01, 10), dv=st.floats(0, 10), rho=st.floats(0.1, 5),
       p=st.floats(2.5, 8))
def test_M_monotone_in_coefficient(v1, dv, rho, p):
    c = CylMagneticPotential.zero().c
    lo = ConcentrationFunctionHandle(V=ScalarPotential("constant", (v1,)), c=c, p=p, e01=1.0)
    hi = ConcentrationFunctionHandle(V=ScalarPotential("constant", (v1 + dv,)), c=c, p=p,
                                     e01=1.0)
    assert hi(rho, 0.0) >= lo(rho, 0.0)


@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_minimize_M_closed_form(b):
    M = ConcentrationFunctionHandle(V=EXAMPLE_V, c=CylMagneticPotential.constant_field(b).c,
                                    p=4.0, normalization="normalized")
    res = minimize_M(M, EXAMPLE_DOM)
    # a value-based search resolves a quadratic minimum to about sqrt(machine eps)
    assert res.rho_star == pytest.approx(2**0.5 / (3 * b * b) ** 0.25, abs=1e-7)
    assert res.x3_star == 0.0
    assert res.inf_closure <= res.m_min


def test_minimize_M_zero_field_left_edge(e01):
    M = ConcentrationFunctionHandle(V=ScalarPotential("constant", (1.0,)),
                                    c=CylMagneticPotential.zero().c, p=4.0)
    res = minimize_M(M, EXAMPLE_DOM)
    assert res.rho_star == pytest.approx(0.5, abs=1e-12)
    assert res.m_min == pytest.approx(2 * np.pi * 0.5 * e01, rel=1e-12)


def test_minimize_M_example_value(e01):
    M = ConcentrationFunctionHandle(V=EXAMPLE_V, c=CylMagneticPotential.constant_field(1.0).c,
                                    p=4.0)
    res = minimize_M(M, EXAMPLE_DOM)
    rs = 2**0.5 / 3**0.25
    assert res.m_min == pytest.approx(2 * math.pi * e01 * rs * (rs**2 / 4 + rs**-2), rel=1e-12)
