import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magnls.errors import DomainError
from magnls.limit2d import ConcentrationFunctionHandle
from magnls.potentials import (
    ConcentrationDomain,
    CylMagneticPotential,
    PenalizationParams,
    ScalarPotential,
    Table2D,
    aux_hardy_H,
    check_equivariance,
    check_lambda_conditions,
    cylindrical_ball_inside,
    d_cyl,
    eval_A,
)
from oracles import curl_fd

PEN = PenalizationParams(0.5, 0.2, 1.0)
coord = st.floats(-5, 5, allow_nan=False)
point = st.tuples(coord, coord, coord)


def _tabulated(phi=None, c=None, a3=None, rho=(0.05, 4.0), zmax=3.0, n=81):
    r = np.linspace(*rho, n)
    zp = np.linspace(0.0, zmax, n)
    za = np.linspace(-zmax, zmax, 2 * n - 1)
    tables = {}
    if phi is not None:
        R, Z = np.meshgrid(r, zp, indexing="ij")
        tables["phi"] = Table2D(r, zp, phi(R, Z))
    if c is not None:
        R, Z = np.meshgrid(r, zp, indexing="ij")
        tables["c"] = Table2D(r, zp, c(R, Z))
    if a3 is not None:
        R, Z = np.meshgrid(r, za, indexing="ij")
        tables["a3"] = Table2D(r, za, a3(R, Z))
    return CylMagneticPotential("custom-tabulated", (), tables)


# ---------------------------------------------------------------- eval_A

def test_eval_A_constant_field_on_x_axis():
    A = eval_A(CylMagneticPotential.constant_field(2.0), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(A, [0.0, 1.0, 0.0], atol=1e-15)


def test_eval_A_frame_rotates_with_angle():
    A = eval_A(CylMagneticPotential.constant_field(2.0), [0.0, 1.0, 0.0])
    np.testing.assert_allclose(A, [-1.0, 0.0, 0.0], atol=1e-15)


def test_eval_A_tabulated_normal_component():
    pot = _tabulated(phi=lambda R, Z: np.full(R.shape, 3.0))
    np.testing.assert_allclose(eval_A(pot, [1.0, 0.0, 0.0]), [3.0, 0.0, 0.0], atol=1e-14)


def test_eval_A_on_axis_raises():
    with pytest.raises(DomainError):
        eval_A(CylMagneticPotential.constant_field(1.0), [0.0, 0.0, 0.3])


@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_constant_field_curl(b):
    pot = CylMagneticPotential.constant_field(b)
    for x in ([1.0, 0.3, 0.2], [-0.4, 1.1, -1.0], [2.0, -2.0, 0.5]):
        B = curl_fd(lambda y: eval_A(pot, y), x, h=1e-3)
        np.testing.assert_allclose(B, [0.0, 0.0, b], atol=1e-8)


def test_constant_field_components():
    pot = CylMagneticPotential.constant_field(1.5)
    rho = np.linspace(0.1, 3, 7)
    np.testing.assert_allclose(pot.c(rho, 0.4), 0.75 * rho)
    assert np.all(pot.phi(rho, 0.4) == 0) and np.all(pot.a3(rho, 0.4) == 0)


@given(st.floats(0.1, 3.5), st.floats(-2.5, 2.5))
def test_tabulated_parity(rho, z):
    pot = _tabulated(phi=lambda R, Z: R * np.exp(-Z**2), c=lambda R, Z: R / 2 + Z**2,
                     a3=lambda R, Z: Z * R)
    r, zz = np.array([rho]), np.array([z])
    assert pot.phi(r, zz)[0] == pot.phi(r, -zz)[0]
    assert pot.c(r, zz)[0] == pot.c(r, -zz)[0]
    # symmetric table: odd up to rounding in the interpolation weights
    assert pot.a3(r, -zz)[0] == pytest.approx(-pot.a3(r, zz)[0], abs=1e-14)


# ---------------------------------------------------------------- equivariance

def test_equivariance_constant_field_exact():
    rep = check_equivariance(CylMagneticPotential.constant_field(1.0), 100, seed=1)
    assert rep.passed
    assert rep.max_violation < 1e-14


def test_equivariance_tabulated_within_interpolation_error():
    def phi(R, Z):
        return np.sin(R) * np.exp(-Z**2)

    def a3(R, Z):
        return Z * np.cos(R)

    pot = _tabulated(phi=phi, c=lambda R, Z: R / 2, a3=a3)
    rng = np.random.default_rng(3)
    r = rng.uniform(0.2, 3.0, 500)
    z = rng.uniform(-2.0, 2.0, 500)
    interp_err = max(np.max(np.abs(pot.phi(r, z) - phi(r, np.abs(z)))),
                     np.max(np.abs(pot.a3(r, z) - a3(r, z))))
    rep = check_equivariance(pot, 100, seed=2)
    assert rep.max_violation <= 2 * interp_err + 1e-14


def test_equivariance_detects_even_a3():
    pot = _tabulated(a3=lambda R, Z: 1.0 + Z**2)
    rep = check_equivariance(pot, 100, seed=0)
    assert not rep.passed
    assert rep.max_violation > 0.5


# ---------------------------------------------------------------- Hardy potential

def test_hardy_at_unit_radius():
    for beta in (0.3, 1.0, 4.0):
        H = aux_hardy_H(PenalizationParams(0.5, 0.2, beta), [1.0, 0.0, 0.0])
        assert H == pytest.approx(0.2, rel=1e-15)


def test_hardy_at_e():
    H = aux_hardy_H(PEN, [0.0, 0.0, math.e])
    assert H == pytest.approx(0.2 / (2 * math.e**2), rel=1e-14)
    assert H == pytest.approx(0.013533528323661, rel=1e-12)


def test_hardy_at_origin_raises():
    with pytest.raises(DomainError):
        aux_hardy_H(PEN, [0.0, 0.0, 0.0])


@given(point.filter(lambda x: 1e-6 < np.linalg.norm(x)))
def test_hardy_upper_bounds(x):
    x = np.asarray(x)
    r = np.linalg.norm(x)
    H = aux_hardy_H(PEN, x)
    assert H > 0
    assert H <= PEN.kappa / r**2 * (1 + 1e-14)
    if abs(math.log(r)) > 0.05:
        assert H <= PEN.kappa / (r**2 * abs(math.log(r)) ** (1 + PEN.beta)) * (1 + 1e-14)


# ---------------------------------------------------------------- pseudometric

def test_d_cyl_examples():
    assert d_cyl([1, 0, 0], [0, 1, 0]) == 0.0
    assert d_cyl([1, 0, 0], [2, 0, 1]) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert d_cyl([3, 4, 2], [0, 5, 2]) == 0.0


@given(point, point, point)
def test_d_cyl_pseudometric_axioms(y, z, w):
    assert d_cyl(y, z) == d_cyl(z, y)
    assert d_cyl(y, y) == 0.0
    assert d_cyl(y, w) <= d_cyl(y, z) + d_cyl(z, w) + 1e-12


# ---------------------------------------------------------------- scalar potentials

SCALARS = [
    ScalarPotential("constant", (2.0,)),
    ScalarPotential("cylindrical-hardy", (1.0, 2.0), alpha_inf=2.0),
    ScalarPotential("radial-power", (1.5, 1.0), alpha_inf=1.0),
    ScalarPotential("compact-bump", (3.0, 1.0, 0.5)),
    ScalarPotential("zero-minimum-well", (1.5, 1.0)),
]


@pytest.mark.parametrize("V", SCALARS, ids=lambda v: v.family)
@settings(max_examples=60)
@given(rho=st.floats(0.01, 10.0), z=st.floats(-10.0, 10.0))
def test_scalar_nonnegative_and_even(V, rho, z):
    a = V(np.array([rho]), np.array([z]))[0]
    b = V(np.array([rho]), np.array([-z]))[0]
    assert a >= 0.0
    assert a == b


def test_scalar_rejects_negative_amplitude():
    with pytest.raises(ValueError):
        ScalarPotential("constant", (-1.0,))


def test_table_csv_roundtrip(tmp_path):
    r = np.linspace(0.1, 2.0, 5)
    z = np.linspace(0.0, 1.0, 4)
    tab = Table2D(r, z, np.outer(r, 1 + z))
    tab.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "rho,x3,value"
    back = Table2D.from_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.values, tab.values)
    with pytest.raises(DomainError):
        back(np.array([5.0]), np.array([0.0]))


# ---------------------------------------------------------------- domain conditions

def _example_M():
    return ConcentrationFunctionHandle(V=ScalarPotential("cylindrical-hardy", (1.0, 2.0)),
                                       c=CylMagneticPotential.constant_field(1.0).c, p=4.0,
                                       normalization="normalized")


def test_lambda_conditions_example():
    rep = check_lambda_conditions(ConcentrationDomain(0.5, 2.0, 0.5), _example_M(),
                                  ScalarPotential("cylindrical-hardy", (1.0, 2.0)))
    assert rep.interior_minimum and rep.below_twice_infimum and rep.potential_positive
    assert rep.argmin_segment == pytest.approx(2**0.5 / 3**0.25, abs=1e-7)


def test_lambda_conditions_minimum_outside():
    rep = check_lambda_conditions(ConcentrationDomain(2.0, 3.0, 0.5), _example_M(),
                                  ScalarPotential("cylindrical-hardy", (1.0, 2.0)))
    assert not rep.interior_minimum
    assert rep.argmin_segment == pytest.approx(2.0, abs=1e-9)


def test_lambda_conditions_zero_potential():
    V0 = ScalarPotential("constant", (0.0,))
    M = ConcentrationFunctionHandle(V=V0, c=CylMagneticPotential.constant_field(1.0).c, p=4.0,
                                    normalization="normalized")
    rep = check_lambda_conditions(ConcentrationDomain(0.5, 2.0, 0.5), M, V0)
    assert not rep.potential_positive
    assert not rep.passed


def test_lambda_conditions_undefined_M():
    V0 = ScalarPotential("constant", (0.0,))
    M = ConcentrationFunctionHandle(V=V0, c=CylMagneticPotential.zero().c, p=4.0,
                                    normalization="normalized")
    with pytest.raises(DomainError):
        check_lambda_conditions(ConcentrationDomain(0.5, 2.0, 0.5), M, V0)


def test_domain_and_penalization_ranges():
    with pytest.raises(ValueError):
        ConcentrationDomain(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        ConcentrationDomain(1.0, 2.0, 0.0)
    for bad in ((1.2, 0.2, 1.0), (0.5, 0.25, 1.0), (0.5, 0.2, 0.0)):
        with pytest.raises(ValueError):
            PenalizationParams(*bad)
    dom = ConcentrationDomain(0.5, 2.0, 0.5)
    assert dom.contains(1.0, 0.0) and not dom.contains(2.5, 0.0)
    assert dom.distance_to_boundary(1.0, 0.1) == pytest.approx(0.4)
    assert cylindrical_ball_inside(dom, (1.0, 0.0), 0.3)
    assert not cylindrical_ball_inside(dom, (1.0, 0.0), 0.6)
