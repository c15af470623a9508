"""Vortex ansatz ``u_k = C_k ((x2 + i x1)/rho)^k v_k`` with real ``v_k``.

For a purely tangential potential ``A = c(rho) e_tau`` the ansatz turns the
complex magnetic equation into a real one with effective potential

    W_k = (k eps / rho + c(rho))^2 + V.

The real problem is solved with the same penalized Nehari machinery, using
``W_k`` as zeroth-order coefficient and no phase coupling.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigError, DomainError
from .potentials import CylMagneticPotential, _min_over_rectangle
from .reduced import ReducedContext, _g
from .solver import SolveConfig, solve


@dataclass(frozen=True, eq=False)
class VortexConfig:
    """Winding number, amplitude constant and the potentials of the ansatz.

    The tangential component is taken from ``magnetic.c`` at ``x3 = 0``;
    potentials whose ``c`` varies with ``x3`` or that carry ``phi`` / ``a3``
    components are rejected.
    """

    k: int
    magnetic: CylMagneticPotential
    V: object
    p: float
    C_k: float = 1.0

    def __post_init__(self):
        if int(self.k) != self.k:
            raise ValueError("winding number must be an integer")
        if self.C_k == 0:
            raise ValueError("C_k must be nonzero")
        if not self.p > 2:
            raise ValueError("p must exceed 2")
        if self.magnetic.c_depends_on_x3():
            raise ConfigError("tangential component depends on x3; the ansatz needs c = c(rho)")
        if not self.magnetic.is_planar_free:
            raise ConfigError("vortex ansatz needs phi = a3 = 0")

    def c(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.magnetic.c(rho, np.zeros_like(rho))

    def far_field_bound(self, probes=(1e2, 1e3, 1e4)):
        """``min c(rho) rho`` over large radii; positive when the far-field condition holds."""
        try:
            return float(np.min(self.c(np.array(probes)) * np.array(probes)))
        except DomainError:
            return float("nan")

    def critical_frequency_check(self, dom, theta=0.9, n=512):
        """``c > 0`` on the closed domain and ``inf (theta c^2 + V) > 0`` there."""
        c_min = _min_over_rectangle(lambda r, z: self.c(r) + 0 * np.asarray(z), dom, n)
        lifted = _min_over_rectangle(lambda r, z: theta * self.c(r) ** 2 + self.V(r, z), dom, n)
        return {"c_min": c_min, "inf_lifted": lifted, "theta": theta,
                "passed": bool(c_min > 0 and lifted > 0)}


def effective_potential(cfg, eps, rho, x3):
    """``(k eps / rho + c(rho))^2 + V(rho, x3)``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("effective potential needs rho > 0")
    return (cfg.k * eps / rho + cfg.c(rho)) ** 2 + cfg.V(rho, x3)


def vortex_context(cfg, eps, grid, pen, dom, nonlinear_coeff=1.0):
    """Real reduced context with ``W_k`` in place of ``c^2 + V``."""
    return ReducedContext(
        eps=eps, grid=grid, magnetic=CylMagneticPotential.zero(), scalar=cfg.V, pen=pen,
        dom=dom, p=cfg.p, nonlinear_coeff=nonlinear_coeff,
        effective_potential=lambda r, z: effective_potential(cfg, eps, r, z),
    )


def solve_vortex(cfg, eps, grid, pen, dom, solver_cfg=None, center=None, init=None):
    """Real positive solution ``v_k`` of the penalized auxiliary equation.

    The solve uses ``C_k = 1``; the returned field is divided by ``C_k``,
    which is exact by homogeneity.
    """
    ctx = vortex_context(cfg, eps, grid, pen, dom)
    res = solve(ctx, solver_cfg or SolveConfig(), center=center, init=init)
    v = np.abs(res.u.real) * np.sign(cfg.C_k) / abs(cfg.C_k)
    res.u = v
    res.peak_value = res.peak_value / abs(cfg.C_k)
    return res


# --------------------------------------------------------------------------
# reconstruction
# --------------------------------------------------------------------------

def _cyl_lap(grid, F):
    """Three-point cylindrical Laplacian in ``(rho, x3)`` on interior nodes."""
    h, hz = grid.h_rho, grid.h_x3
    rho = grid.rho[1:-1, None]
    c = F[1:-1, 1:-1]
    rp, rm = rho + h / 2, rho - h / 2
    drr = (rp * (F[2:, 1:-1] - c) - rm * (c - F[:-2, 1:-1])) / (rho * h * h)
    dzz = (F[1:-1, 2:] - 2 * c + F[1:-1, :-2]) / (hz * hz)
    return drr + dzz


@dataclass(frozen=True)
class ReconstructionReport:
    k: int
    theta_samples: int
    max_diff: float
    scale: float
    modulus_error: float

    @property
    def rel_diff(self):
        return self.max_diff / self.scale if self.scale > 0 else 0.0


def reconstruct_uk(cfg, eps, grid, v, pen, dom, theta_samples=32, k=None, C_k=None):
    """Compare the full residual of ``u_k`` with the reduced residual of ``v_k``.

    ``u_k`` is sampled on ``theta_samples`` equispaced angles.  The full
    operator ``-eps^2 Δ + 2 i eps (c/rho) d_theta + c^2 + V`` is applied with
    periodic central differences in ``theta`` and the same ``(rho, x3)``
    stencil as the reduced residual, so the two residuals differ only by the
    angular discretization error, ``O(dtheta^2)``, and agree exactly for
    ``k = 0``.
    """
    k = cfg.k if k is None else int(k)
    C = cfg.C_k if C_k is None else C_k
    v = np.asarray(v, dtype=float)
    R, Z = grid.mesh
    Ri, Zi = R[1:-1, 1:-1], Z[1:-1, 1:-1]
    c = cfg.c(Ri)
    Vv = cfg.V(Ri, Zi)
    ctx = vortex_context(cfg, eps, grid, pen, dom)
    cap = ctx.cap_at(Ri, Zi)
    vi = v[1:-1, 1:-1]
    Wk = (k * eps / Ri + c) ** 2 + Vv
    r_red = (-eps**2 * _cyl_lap(grid, v) + Wk * vi
             - _g(cap, (C * vi) ** 2, cfg.p) * vi)

    n = int(theta_samples)
    dth = 2 * np.pi / n
    theta = np.arange(n) * dth
    phase = (1j ** k) * np.exp(-1j * k * theta)  # ((x2 + i x1)/rho)^k
    U = C * phase[:, None, None] * v[None, :, :]
    Up = np.roll(U, -1, axis=0)
    Um = np.roll(U, 1, axis=0)
    Ui = U[:, 1:-1, 1:-1]
    d_th = (Up - Um)[:, 1:-1, 1:-1] / (2 * dth)
    d_thth = (Up - 2 * U + Um)[:, 1:-1, 1:-1] / dth**2
    lap = np.stack([_cyl_lap(grid, U[m]) for m in range(n)]) + d_thth / Ri**2
    r_full = (-eps**2 * lap + 2j * eps * (c / Ri) * d_th + (c**2 + Vv) * Ui
              - _g(cap, np.abs(Ui) ** 2, cfg.p) * Ui)
    expected = C * phase[:, None, None] * r_red[None, :, :]
    diff = float(np.max(np.abs(r_full - expected)))
    scale = float(np.max(np.abs(C * Wk * vi)))
    mod_err = float(np.max(np.abs(np.abs(U) - abs(C) * np.abs(v)[None])))
    return ReconstructionReport(k=k, theta_samples=n, max_diff=diff, scale=scale,
                                modulus_error=mod_err)


def reconstruction_refinement(cfg, eps, grid, v, pen, dom, theta_samples=(16, 32), k=None):
    """Ratio of reconstruction differences when the angular samples double."""
    a = reconstruct_uk(cfg, eps, grid, v, pen, dom, theta_samples[0], k=k)
    b = reconstruct_uk(cfg, eps, grid, v, pen, dom, theta_samples[1], k=k)
    return a, b, (a.max_diff / b.max_diff if b.max_diff > 0 else math.inf)
