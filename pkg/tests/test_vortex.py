import numpy as np
import pytest

from magnls._numerics import scan_then_golden
from magnls.config import default_config_path, load_config
from magnls.errors import ConfigError, DomainError
from magnls.limit2d import ConcentrationFunctionHandle, ground_state_for, minimize_M
from magnls.potentials import CylMagneticPotential, ScalarPotential, Table2D
from magnls.reduced import HalfPlaneGrid
from magnls.solver import SolveConfig, solve, solve_penalized
from magnls.vortex import (
    VortexConfig,
    effective_potential,
    reconstruct_uk,
    reconstruction_refinement,
    solve_vortex,
    vortex_context,
)

SMALL = HalfPlaneGrid(0.1, 4.0, -2.0, 2.0, 96, 96)


@pytest.fixture(scope="module")
def critical_cfg():
    return load_config(default_config_path().parent / "critical_frequency.json")


def _vcfg(cfg, k, C_k=1.0):
    return VortexConfig(k, cfg.magnetic, cfg.scalar, cfg.p, C_k)


# ---------------------------------------------------------------- effective potential

def test_effective_potential_examples(example_cfg):
    rho = np.linspace(0.3, 3.0, 9)
    W0 = effective_potential(_vcfg(example_cfg, 0), 0.1, rho, 0.2 + 0 * rho)
    np.testing.assert_allclose(W0, rho**2 / 4 + rho**-2, rtol=1e-14)
    v = VortexConfig(1, CylMagneticPotential.constant_field(1.0),
                     ScalarPotential("constant", (0.0,)), 4.0)
    assert effective_potential(v, 0.1, 1.0, 0.0) == pytest.approx(0.36, rel=1e-14)
    with pytest.raises(DomainError):
        effective_potential(v, 0.1, 0.0, 0.0)


def test_far_field_bound(example_cfg):
    v = _vcfg(example_cfg, 2)
    assert v.far_field_bound() > 0
    rho = np.array([1e2, 1e3, 1e4])
    assert np.all(effective_potential(v, 0.1, rho, 0 * rho) * rho**2 >= v.far_field_bound() ** 2)


def test_config_rejections(example_cfg):
    r = np.linspace(0.05, 5, 11)
    z = np.linspace(0, 3, 7)
    R, Z = np.meshgrid(r, z, indexing="ij")
    c_z = CylMagneticPotential("custom-tabulated", (), {"c": Table2D(r, z, R + Z)})
    with pytest.raises(ConfigError):
        VortexConfig(1, c_z, example_cfg.scalar, 4.0)
    with_phi = CylMagneticPotential("custom-tabulated", (), {"phi": Table2D(r, z, R)})
    with pytest.raises(ConfigError):
        VortexConfig(1, with_phi, example_cfg.scalar, 4.0)
    with pytest.raises(ValueError):
        VortexConfig(1, example_cfg.magnetic, example_cfg.scalar, 4.0, C_k=0.0)


# ---------------------------------------------------------------- solves

def test_k0_matches_cylindrical_solve(example_cfg):
    cfg = example_cfg
    vres = solve_vortex(_vcfg(cfg, 0), 0.2, SMALL, cfg.pen, cfg.dom)
    ref = solve(cfg.context(0.2).with_grid(SMALL), SolveConfig())
    assert np.max(np.abs(vres.u - np.abs(ref.u))) <= 1e-8 * ref.peak_value
    assert vres.c_eps == pytest.approx(ref.c_eps, rel=1e-12)
    assert np.all(vres.u >= 0) and not np.iscomplexobj(vres.u)


def test_k1_peak_shift_is_order_eps(example_cfg):
    cfg = example_cfg
    eps = 0.1
    v1 = _vcfg(cfg, 1)
    r1 = solve_vortex(v1, eps, cfg.grid, cfg.pen, cfg.dom, cfg.solver)
    r0 = solve_vortex(_vcfg(cfg, 0), eps, cfg.grid, cfg.pen, cfg.dom, cfg.solver)
    assert abs(r1.peak[0] - r0.peak[0]) <= eps
    rho_k, _ = scan_then_golden(
        lambda r: r * effective_potential(v1, eps, r, 0 * r) ** (2 / (cfg.p - 2)),
        cfg.dom.rho_lo, cfg.dom.rho_hi)
    assert abs(r1.peak[0] / rho_k - 1) <= 0.05


def test_Ck_rescaling_exact(example_cfg):
    cfg = example_cfg
    a = solve_vortex(_vcfg(cfg, 1), 0.2, SMALL, cfg.pen, cfg.dom)
    b = solve_vortex(_vcfg(cfg, 1, C_k=2.0), 0.2, SMALL, cfg.pen, cfg.dom)
    np.testing.assert_allclose(b.u, a.u / 2.0, rtol=0, atol=1e-15)


def test_nonlinear_coefficient_homogeneity(example_cfg):
    cfg = example_cfg
    gamma = 3.0
    v = _vcfg(cfg, 1)
    a = solve_penalized(vortex_context(v, 0.2, SMALL, cfg.pen, cfg.dom))
    b = solve_penalized(vortex_context(v, 0.2, SMALL, cfg.pen, cfg.dom, nonlinear_coeff=gamma))
    scale = gamma ** (-1 / (cfg.p - 2))
    assert np.max(np.abs(np.abs(b.u) - scale * np.abs(a.u))) <= 1e-6 * np.abs(b.u).max()
    assert b.peak == pytest.approx(a.peak, abs=1e-9)


def test_critical_frequency_setup(critical_cfg):
    v = _vcfg(critical_cfg, 0)
    chk = v.critical_frequency_check(critical_cfg.dom)
    assert chk["passed"] and chk["c_min"] == pytest.approx(1.0)
    M = ConcentrationFunctionHandle(V=critical_cfg.scalar, c=critical_cfg.magnetic.c, p=4.0,
                                    normalization="normalized")
    # rho (1 + (rho - 2)^2) is minimal at rho = 5/3
    assert minimize_M(M, critical_cfg.dom).rho_star == pytest.approx(5 / 3, abs=1e-7)


def test_critical_frequency_amplitude(critical_cfg):
    cfg = critical_cfg
    v = _vcfg(cfg, 0)
    peaks = []
    for eps in (0.4, 0.2, 0.1):
        res = solve_vortex(v, eps, cfg.grid, cfg.pen, cfg.dom, cfg.solver)
        peaks.append(res.peak_value)
    a0 = float(v.c(np.array([5 / 3]))[0] ** 2 + cfg.scalar(np.array([5 / 3]), np.array([0.0]))[0])
    assert min(peaks) > 0.5 * ground_state_for(a0, 4.0).w0


# ---------------------------------------------------------------- reconstruction

@pytest.fixture(scope="module")
def vortex_fields(example_cfg):
    cfg = example_cfg
    out = {}
    for k in (0, 1, 2):
        out[k] = solve_vortex(_vcfg(cfg, k), 0.2, SMALL, cfg.pen, cfg.dom).u
    return out


def test_reconstruction_k0_exact(example_cfg, vortex_fields):
    cfg = example_cfg
    rep = reconstruct_uk(_vcfg(cfg, 0, C_k=1.7), 0.2, SMALL, vortex_fields[0], cfg.pen,
                         cfg.dom, 8)
    assert rep.rel_diff <= 1e-14
    assert rep.modulus_error <= 1e-14


@pytest.mark.parametrize("k", [1, 2])
def test_reconstruction_second_order(example_cfg, vortex_fields, k):
    cfg = example_cfg
    v = _vcfg(cfg, k)
    a, b, ratio = reconstruction_refinement(v, 0.2, SMALL, vortex_fields[k], cfg.pen, cfg.dom,
                                            (16, 32))
    assert 3.5 < ratio < 4.5
    assert b.modulus_error <= 1e-14 * np.abs(vortex_fields[k]).max()
