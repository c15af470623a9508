"""Fast invariant suite run by ``magnls verify``."""

from dataclasses import dataclass

import numpy as np

from .limit2d import ConcentrationFunctionHandle, solve_limit_ground_state
from .potentials import (
    ConcentrationDomain,
    CylMagneticPotential,
    Table2D,
    aux_hardy_H,
    check_equivariance,
    check_lambda_conditions,
    d_cyl,
)
from .reduced import (
    HalfPlaneGrid,
    ReducedContext,
    _G,
    _g,
    dJ_eps,
    energy_norm,
    gradient_part,
    hardy_part,
    J_eps,
    modulus_gradient_part,
)
from .solver import nehari_time


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    threshold: float

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": float(self.value),
                "threshold": float(self.threshold)}


def coupled_magnetic(grid, phi_amp=0.4, a3_amp=0.3):
    """Tabulated potential with nonzero ``phi`` and odd ``a3`` covering ``grid``."""
    rho = np.linspace(grid.rho_min - 0.5 * grid.h_rho, grid.rho_max + 0.5 * grid.h_rho, 161)
    zpos = np.linspace(0.0, max(abs(grid.x3_min), abs(grid.x3_max)) + grid.h_x3, 81)
    zall = np.linspace(grid.x3_min - grid.h_x3, grid.x3_max + grid.h_x3, 161)
    Rp, Zp = np.meshgrid(rho, zpos, indexing="ij")
    Ra, Za = np.meshgrid(rho, zall, indexing="ij")
    tables = {
        "phi": Table2D(rho, zpos, phi_amp * Rp * np.exp(-Zp**2)),
        "c": Table2D(rho, zpos, 0.5 * Rp),
        "a3": Table2D(rho, zall, a3_amp * Za * Ra),
    }
    return CylMagneticPotential("custom-tabulated", (), tables)


def constant_gauge_magnetic(grid, s1, s2):
    """Tabulated potential ``phi = s1``, ``a3 = s2``, ``c = rho/2``."""
    rho = np.linspace(grid.rho_min - grid.h_rho, grid.rho_max + grid.h_rho, 41)
    zpos = np.linspace(0.0, max(abs(grid.x3_min), abs(grid.x3_max)) + grid.h_x3, 21)
    zall = np.linspace(grid.x3_min - grid.h_x3, grid.x3_max + grid.h_x3, 41)
    Rp, _ = np.meshgrid(rho, zpos, indexing="ij")
    return CylMagneticPotential("custom-tabulated", (), {
        "phi": Table2D(rho, zpos, np.full(Rp.shape, float(s1))),
        "c": Table2D(rho, zpos, 0.5 * Rp),
        "a3": Table2D(rho, zall, np.full((rho.size, zall.size), float(s2))),
    })


def smooth_random_field(grid, rng, n_bumps=4, complex_=True):
    """Sum of random Gaussians with random phases, zero on the boundary."""
    R, Z = grid.mesh
    u = np.zeros(grid.shape, dtype=complex)
    for _ in range(n_bumps):
        r0 = rng.uniform(grid.rho_min + 0.2 * (grid.rho_max - grid.rho_min),
                         grid.rho_max - 0.2 * (grid.rho_max - grid.rho_min))
        z0 = rng.uniform(0.6 * grid.x3_min, 0.6 * grid.x3_max)
        w = rng.uniform(0.15, 0.5)
        amp = rng.normal() + (1j * rng.normal() if complex_ else 0)
        k = rng.normal(size=2) * (3.0 if complex_ else 0.0)
        u += amp * np.exp(-((R - r0) ** 2 + (Z - z0) ** 2) / w**2) * np.exp(
            1j * (k[0] * R + k[1] * Z))
    u[0, :] = u[-1, :] = u[:, 0] = u[:, -1] = 0
    return u


def whole_grid_domain(grid):
    """A domain containing every node, which makes the nonlinearity a pure power."""
    zmax = max(abs(grid.x3_min), abs(grid.x3_max))
    return ConcentrationDomain(0.5 * grid.rho_min, 2.0 * grid.rho_max, 2.0 * zmax + 1.0)


def _ctx(cfg, eps, grid, magnetic=None, dom=None):
    return ReducedContext(eps, grid, magnetic or cfg.magnetic, cfg.scalar, cfg.pen,
                          dom or cfg.dom, cfg.p)


def run_suite(cfg, seed=None, include_limit=True):
    """Run every invariant check; returns a list of :class:`Check`."""
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    out = []

    rep = check_equivariance(cfg.magnetic, 100, seed=seed)
    out.append(Check("equivariance", rep.passed, rep.max_violation, rep.tol))

    x = rng.normal(size=(500, 3)) * np.exp(rng.uniform(-3, 3, size=(500, 1)))
    H = aux_hardy_H(cfg.pen, x)
    excess = float(np.max(H * np.sum(x**2, -1) / cfg.pen.kappa)) - 1.0
    out.append(Check("hardy_potential_bound", excess <= 1e-14, excess, 1e-14))

    y, z, w = (rng.normal(size=(200, 3)) for _ in range(3))
    tri = float(np.max(d_cyl(y, w) - d_cyl(y, z) - d_cyl(z, w)))
    sym = float(np.max(np.abs(d_cyl(y, z) - d_cyl(z, y))))
    out.append(Check("pseudometric_axioms", tri <= 1e-12 and sym == 0.0, max(tri, sym), 1e-12))

    handle = ConcentrationFunctionHandle(V=cfg.scalar, c=cfg.magnetic.c, p=cfg.p,
                                         normalization="normalized")
    try:
        lam = check_lambda_conditions(cfg.dom, handle, cfg.scalar)
        out.append(Check("domain_conditions", lam.passed, lam.inf_segment, lam.inf_domain))
    except ValueError:
        out.append(Check("domain_conditions", False, float("nan"), float("nan")))

    # discrete inequalities on a coarse grid with full phase coupling
    g = HalfPlaneGrid(cfg.grid.rho_min, cfg.grid.rho_max, cfg.grid.x3_min, cfg.grid.x3_max,
                      48, 48)
    ctx = _ctx(cfg, 0.3, g, magnetic=coupled_magnetic(g))
    worst_dia, worst_hardy = -np.inf, -np.inf
    for _ in range(100):
        u = smooth_random_field(g, rng)
        gp = gradient_part(ctx, u)
        worst_dia = max(worst_dia, (modulus_gradient_part(ctx, u) - gp) / gp)
        worst_hardy = max(worst_hardy, (hardy_part(ctx, u) - gp) / gp)
    out.append(Check("diamagnetic", worst_dia <= 1e-12, worst_dia, 1e-12))
    out.append(Check("magnetic_hardy", worst_hardy <= 0.0, worst_hardy, 0.0))

    # penalized nonlinearity on nodes x log-spaced levels
    s = np.logspace(-8, 4, 200)[None, :]
    cap = ctx.cap[:, None]
    inside = ctx.inside
    gv, Gv = _g(cap, s, ctx.p), _G(cap, s, ctx.p)
    ok_in = np.all(ctx.p * Gv[inside] <= gv[inside] * s * (1 + 1e-12))
    out_ = ~inside
    ok_out = np.all(2 * Gv[out_] <= gv[out_] * s * (1 + 1e-12)) and np.all(
        gv[out_] * s <= cap[out_] * s * (1 + 1e-12))
    g_sq = _g(cap, s**2, ctx.p)
    ok_mono = np.all(np.diff(g_sq, axis=1) >= 0)
    out.append(Check("penalized_nonlinearity", bool(ok_in and ok_out and ok_mono),
                     float(ok_in) + float(ok_out) + float(ok_mono), 3.0))

    # Nehari bisection against the pure-power closed form
    ctx_all = _ctx(cfg, 0.3, g, magnetic=coupled_magnetic(g), dom=whole_grid_domain(g))
    worst = 0.0
    for _ in range(10):
        u = smooth_random_field(g, rng)
        t = nehari_time(ctx_all, u)
        q = energy_norm(ctx_all, u)
        W = g.node_weights
        t_exact = (q / float(np.sum(W * np.abs(u) ** ctx.p))) ** (1 / (ctx.p - 2))
        worst = max(worst, abs(t / t_exact - 1))
    out.append(Check("nehari_closed_form", worst <= 1e-10, worst, 1e-10))

    # derivative against central differences
    worst = 0.0
    for _ in range(20):
        u = smooth_random_field(g, rng)
        v = smooth_random_field(g, rng)
        exact = dJ_eps(ctx, u, v)
        d = 1e-3
        fd = (J_eps(ctx, u + d * v) - J_eps(ctx, u - d * v)) / (2 * d)
        scale = abs(J_eps(ctx, u + v)) + abs(J_eps(ctx, u)) + abs(exact)
        worst = max(worst, abs(fd - exact) / scale)
    out.append(Check("gradient_vs_finite_difference", worst <= 1e-5, worst, 1e-5))

    # gauge covariance under linear phase changes, three nested grids
    errs = []
    for n in (33, 65, 129):
        gg = HalfPlaneGrid(cfg.grid.rho_min, cfg.grid.rho_max, cfg.grid.x3_min,
                           cfg.grid.x3_max, n, n)
        R, Z = gg.mesh
        eps = 0.5
        s1, s2 = 0.7, -0.4
        u = np.exp(-((R - 1.2) ** 2 + Z**2) / 0.3).astype(complex)
        u[0, :] = u[-1, :] = u[:, 0] = u[:, -1] = 0
        c0 = _ctx(cfg, eps, gg, magnetic=constant_gauge_magnetic(gg, 0.0, 0.0))
        c1 = _ctx(cfg, eps, gg, magnetic=constant_gauge_magnetic(gg, s1, s2))
        ug = u * np.exp(1j * (s1 * R + s2 * Z) / eps)
        errs.append(abs(energy_norm(c1, ug) - energy_norm(c0, u)) / energy_norm(c0, u))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    out.append(Check("gauge_covariance_order", min(ratios) >= 3.0, min(ratios), 3.0))

    if include_limit:
        e1 = solve_limit_ground_state(1.0, cfg.p).energy
        worst = 0.0
        for a0 in (0.5, 2.0):
            ea = solve_limit_ground_state(a0, cfg.p).energy
            worst = max(worst, abs(ea - a0 ** (2 / (cfg.p - 2)) * e1) / e1)
        out.append(Check("ground_energy_scaling", worst <= 1e-3, worst, 1e-3))
    return out


def all_passed(checks):
    return all(c.passed for c in checks)


def check_table(checks):
    width = max(len(c.name) for c in checks)
    lines = []
    for c in checks:
        flag = "PASS" if c.passed else "FAIL"
        lines.append(f"{flag}  {c.name.ljust(width)}  value={c.value:.4g}  threshold={c.threshold:.4g}")
    return "\n".join(lines)


__all__ = ["Check", "run_suite", "all_passed", "check_table", "coupled_magnetic",
           "constant_gauge_magnetic", "smooth_random_field", "whole_grid_domain"]
