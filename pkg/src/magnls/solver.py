"""Least-energy critical points of the penalized functional.

Iterates stay on the Nehari manifold: every trial point is rescaled along its
ray to the unique maximizer of ``t -> J(t u)``.  On that manifold the
derivative of ``u -> J(t*(u) u)`` coincides with ``J'(u)``, so any descent
method for ``J`` restricted to the manifold converges to a critical point of
``J`` itself.  The default descent direction is limited-memory BFGS whose
initial inverse Hessian is the inverse of the quadratic form, which makes the
iteration count essentially independent of the mesh size and of ``eps``.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.optimize import brentq
import scipy.sparse.linalg as sla

from ._numerics import scan_then_golden, smoothstep
from .errors import ConvergenceError, DomainError, RayDegenerateError, SolverError
from .limit2d import ground_energy_unit, ground_state_for
from .reduced import _dual_grad_vec, _g, _J_vec, locate_peak

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    """Iteration controls.

    ``preconditioner="energy"`` selects L-BFGS preconditioned by the inverse
    quadratic form; ``"none"`` is plain weighted-L^2 gradient descent with
    initial step ``1/lambda_max`` from power iteration.
    """

    max_iters: int = 500
    grad_tol: float = 1e-8
    step_rule: str = "armijo"
    nehari_tol: float = 1e-12
    init: str = "limit-profile"
    preconditioner: str = "energy"
    memory: int = 10
    armijo_c1: float = 1e-4
    restart_guard: bool = True
    guard_margin: float = 0.1
    power_iters: int = 20

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.grad_tol > 0 and self.nehari_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.step_rule not in ("armijo", "fixed"):
            raise ValueError("step_rule must be 'armijo' or 'fixed'")
        if self.preconditioner not in ("energy", "none"):
            raise ValueError("preconditioner must be 'energy' or 'none'")
        if self.init not in ("limit-profile",):
            raise ValueError("unknown init strategy")

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(eq=False)
class SolveResult:
    u: np.ndarray
    c_eps: float
    residual: float
    iterations: int
    peak: tuple
    peak_value: float
    eps: float
    converged: bool = True
    grad_l2: float = float("nan")
    energy_norm: float = float("nan")
    energy_history: list = field(default_factory=list)
    max_nehari_defect: float = 0.0
    upper_bound: float = float("nan")
    upper_bound_violated: bool = False
    restarts: int = 0
    flags: list = field(default_factory=list)

    def summary(self):
        """JSON-friendly scalar diagnostics (no field data)."""
        return {
            "eps": self.eps,
            "c_eps": self.c_eps,
            "c_eps_over_eps2": self.c_eps / self.eps**2,
            "residual": self.residual,
            "grad_l2": self.grad_l2,
            "energy_norm": self.energy_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "peak_rho": self.peak[0],
            "peak_x3": self.peak[1],
            "peak_value": self.peak_value,
            "max_nehari_defect": self.max_nehari_defect,
            "upper_bound": self.upper_bound,
            "upper_bound_violated": self.upper_bound_violated,
            "restarts": self.restarts,
            "flags": list(self.flags),
        }


# --------------------------------------------------------------------------
# Nehari projection
# --------------------------------------------------------------------------

def _ray_parts(ctx, v, Kv=None):
    Kv = ctx.K @ v if Kv is None else Kv
    Q = float(np.real(np.vdot(v, Kv)))
    s = np.abs(v) ** 2
    return Q, s


def _psi(ctx, Q, s, t):
    """``<J'(t u), t u> / t^2``; nonincreasing in ``t``."""
    return Q - float(np.sum(ctx.weights * _g(ctx.cap, t * t * s, ctx.p, ctx.nonlinear_coeff) * s))


def _nehari_time_vec(ctx, v, Kv=None, xtol=1e-15, t_max=1e12):
    Q, s = _ray_parts(ctx, v, Kv)
    if not Q > 0:
        raise RayDegenerateError("zero function has no ray maximum")
    # pure-power estimate seeds the bracket
    num = float(np.sum(ctx.weights * ctx.nonlinear_coeff * s ** (ctx.p / 2.0)))
    t0 = (Q / num) ** (1.0 / (ctx.p - 2.0)) if num > 0 else 1.0
    lo, hi = t0, t0
    while _psi(ctx, Q, s, lo) <= 0:
        lo *= 0.5
        if lo < 1e-300:
            raise RayDegenerateError("ray derivative is not positive near zero")
    while _psi(ctx, Q, s, hi) > 0:
        hi *= 2.0
        if hi > t_max * t0:
            raise RayDegenerateError(
                "no ray maximum: the superquadratic part is capped on the support")
    if lo == hi:
        return lo
    return brentq(lambda t: _psi(ctx, Q, s, t), lo, hi, xtol=1e-300, rtol=xtol * 4, maxiter=200)


def nehari_time(ctx, u):
    """``t* > 0`` with ``d/dt J(t u) = 0`` at ``t*``.

    Raises
    ------
    RayDegenerateError
        If ``t -> J(t u)`` has no interior maximum.
    """
    v = ctx.grid.interior(u).astype(complex)
    return _nehari_time_vec(ctx, v)


def nehari_defect(ctx, u):
    """``|<J'(u), u>| / ||u||^2``."""
    v = ctx.grid.interior(u).astype(complex)
    Q, s = _ray_parts(ctx, v)
    return abs(_psi(ctx, Q, s, 1.0)) / Q


# --------------------------------------------------------------------------
# initial guess
# --------------------------------------------------------------------------

def init_guess(ctx, center):
    """Cut-off, rescaled limit profile with the local gauge phase.

    Raises
    ------
    DomainError
        If ``center`` is not inside the concentration domain.
    """
    rho0, z0 = float(center[0]), float(center[1])
    dom = ctx.dom
    if not bool(dom.contains(rho0, z0)):
        raise DomainError(f"center {center} is outside the concentration domain")
    a0 = float(ctx.coefficient(np.array([rho0]), np.array([z0]))[0])
    if not a0 > 0:
        raise DomainError("limit coefficient must be positive at the center")
    gs = ground_state_for(a0, ctx.p)
    R, Z = ctx.grid.mesh
    d = np.hypot(R - rho0, Z - z0)
    prof = gs(d / ctx.eps) * ctx.nonlinear_coeff ** (-1.0 / (ctx.p - 2.0))
    margin = float(dom.distance_to_boundary(rho0, z0))
    dist = np.where(dom.contains(R, Z), dom.distance_to_boundary(R, Z), 0.0)
    cut = smoothstep(dist / (0.5 * margin))
    phi0 = float(ctx.magnetic.phi(np.array([rho0]), np.array([0.0]))[0])
    a30 = float(ctx.magnetic.a3(np.array([rho0]), np.array([0.0]))[0])
    phase = np.exp(1j * (phi0 * (R - rho0) + a30 * Z) / ctx.eps)
    u = prof * cut * phase
    u[0, :] = u[-1, :] = u[:, 0] = u[:, -1] = 0
    return u


def concentration_shape(ctx, rho, x3):
    """Constant-free concentration function for the context's coefficient."""
    a = ctx.coefficient(rho, x3)
    dens = np.ones_like(np.asarray(rho, float)) if ctx.grid.planar else np.asarray(rho, float)
    return dens * a ** (2.0 / (ctx.p - 2.0))


def default_center(ctx):
    """Minimizer of the concentration function on the domain's mid-plane."""
    dom = ctx.dom
    rho, _ = scan_then_golden(lambda r: concentration_shape(ctx, r, np.zeros_like(r)),
                              dom.rho_lo, dom.rho_hi, n=2048)
    # stay strictly inside so the cutoff has room
    pad = 0.05 * (dom.rho_hi - dom.rho_lo)
    return (min(max(rho, dom.rho_lo + pad), dom.rho_hi - pad), 0.0)


def upper_bound(ctx):
    """``eps^2 inf`` of the concentration function over the mid-plane segment."""
    dom = ctx.dom
    _, m = scan_then_golden(lambda r: concentration_shape(ctx, r, np.zeros_like(r)),
                            dom.rho_lo, dom.rho_hi, n=2048)
    scale = 2 * np.pi * ground_energy_unit(ctx.p) * ctx.nonlinear_coeff ** (-2.0 / (ctx.p - 2))
    if ctx.grid.planar:
        scale /= 2 * np.pi
    return ctx.eps**2 * scale * m


# --------------------------------------------------------------------------
# iteration
# --------------------------------------------------------------------------

class _Preconditioner:
    """Action of the inverse quadratic form, real-split when possible."""

    def __init__(self, ctx):
        K = ctx.K
        self.real = not np.iscomplexobj(K.data)
        self.lu = sla.splu(K.tocsc())

    def __call__(self, r):
        if self.real:
            return self.lu.solve(np.ascontiguousarray(r.real)) + 1j * self.lu.solve(
                np.ascontiguousarray(r.imag))
        return self.lu.solve(r)


def _rdot(a, b):
    return float(np.real(np.vdot(a, b)))


def _lambda_max(ctx, iters, seed=0):
    """Largest eigenvalue of ``W^-1 K`` by power iteration."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(ctx.K.shape[0])
    lam = 1.0
    for _ in range(iters):
        y = (ctx.K @ x) / ctx.weights
        lam = float(np.linalg.norm(y) / np.linalg.norm(x))
        x = y / np.linalg.norm(y)
    # power iteration underestimates; pad by a safety factor
    return 1.1 * lam


def solve_penalized(ctx, cfg=None, init=None):
    """Nehari-constrained descent from ``init`` (a full-grid field).

    Raises
    ------
    ConvergenceError
        When ``max_iters`` is exhausted; ``result`` carries the best iterate.
    RayDegenerateError
        When a projection fails.
    """
    cfg = cfg or SolveConfig()
    if init is None:
        init = init_guess(ctx, default_center(ctx))
    g = ctx.grid
    v = g.interior(init).astype(complex)
    Kv = ctx.K @ v
    t = _nehari_time_vec(ctx, v, Kv)
    v, Kv = t * v, t * Kv
    J = _J_vec(ctx, v, Kv)
    d = _dual_grad_vec(ctx, v, Kv)

    if cfg.preconditioner == "energy":
        prec = _Preconditioner(ctx)
        dual_norm = lambda r: math.sqrt(max(_rdot(r, prec(r)), 0.0))  # noqa: E731
        tau0 = 1.0
    else:
        prec = None
        tau0 = 1.0 / _lambda_max(ctx, cfg.power_iters)
        dual_norm = lambda r: math.sqrt(_rdot(r, r / ctx.weights))  # noqa: E731

    def rel_res(dvec, Kvec, vec):
        return dual_norm(dvec) / math.sqrt(max(_rdot(vec, Kvec), 1e-300))

    history = [J]
    S, Y = [], []
    max_defect = 0.0
    res = rel_res(d, Kv, v)
    it = 0
    while res > cfg.grad_tol and it < cfg.max_iters:
        it += 1
        # search direction
        if prec is None:
            direction = -d / ctx.weights
        else:
            q = d.copy()
            alphas = []
            for s_k, y_k in reversed(list(zip(S, Y))):
                rho_k = 1.0 / _rdot(y_k, s_k)
                a_k = rho_k * _rdot(s_k, q)
                alphas.append((a_k, rho_k, s_k, y_k))
                q = q - a_k * y_k
            r = prec(q)
            if S:
                r *= _rdot(S[-1], Y[-1]) / _rdot(Y[-1], prec(Y[-1]))
            for a_k, rho_k, s_k, y_k in reversed(alphas):
                b_k = rho_k * _rdot(y_k, r)
                r = r + (a_k - b_k) * s_k
            direction = -r
        slope = _rdot(d, direction)
        if slope >= 0:
            # lost descent: fall back to the preconditioned gradient
            S.clear()
            Y.clear()
            direction = -(prec(d) if prec is not None else d / ctx.weights)
            slope = _rdot(d, direction)

        tau = tau0
        allowance = 1e-13 * abs(J)
        accepted = False
        for _ in range(60):
            w = v + tau * direction
            Kw = ctx.K @ w
            try:
                tw = _nehari_time_vec(ctx, w, Kw)
            except RayDegenerateError:
                tau *= 0.5
                continue
            w, Kw = tw * w, tw * Kw
            Jw = _J_vec(ctx, w, Kw)
            if cfg.step_rule == "fixed" or Jw <= J + cfg.armijo_c1 * tau * slope + allowance:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            log.debug("line search stalled at iteration %d", it)
            break
        dw = _dual_grad_vec(ctx, w, Kw)
        s_vec, y_vec = w - v, dw - d
        sy = _rdot(s_vec, y_vec)
        if sy > 1e-14 * math.sqrt(_rdot(s_vec, s_vec) * _rdot(y_vec, y_vec)):
            S.append(s_vec)
            Y.append(y_vec)
            if len(S) > cfg.memory:
                S.pop(0)
                Y.pop(0)
        v, Kv, d, J = w, Kw, dw, Jw
        Q, s = _ray_parts(ctx, v, Kv)
        max_defect = max(max_defect, abs(_psi(ctx, Q, s, 1.0)) / Q)
        history.append(J)
        res = rel_res(d, Kv, v)

    u = g.embed(v)
    rho_p, z_p, val = locate_peak(g, u)
    result = SolveResult(
        u=u, c_eps=float(J), residual=float(res), iterations=it, peak=(rho_p, z_p),
        peak_value=val, eps=ctx.eps, converged=res <= cfg.grad_tol,
        grad_l2=math.sqrt(_rdot(d, d / ctx.weights)), energy_norm=_rdot(v, Kv),
        energy_history=history, max_nehari_defect=max_defect,
    )
    if not result.converged:
        raise ConvergenceError(
            f"residual {res:.3e} above {cfg.grad_tol:.1e} after {it} iterations", result=result)
    return result


def solve(ctx, cfg=None, center=None, init=None):
    """Solve from a limit-profile guess with the upper-bound restart guard.

    The returned result is the lowest-energy converged solve.  If the
    energy stays above ``eps^2 inf M (1 + margin)`` after the restarts, the
    result is flagged rather than rejected.
    """
    cfg = cfg or SolveConfig()
    if init is None:
        center = default_center(ctx) if center is None else center
        init = init_guess(ctx, center)
    best = solve_penalized(ctx, cfg, init)
    try:
        bound = upper_bound(ctx)
    except (DomainError, SolverError):
        bound = float("nan")
    best.upper_bound = bound
    if not (cfg.restart_guard and np.isfinite(bound)) or best.c_eps <= bound * (1 + cfg.guard_margin):
        return best
    dom = ctx.dom
    c0 = center if center is not None else best.peak
    dr = 0.1 * (dom.rho_hi - dom.rho_lo)
    dz = 0.25 * dom.x3_half_width
    pad = 0.05 * (dom.rho_hi - dom.rho_lo)
    candidates = [(c0[0] - dr, 0.0), (c0[0] + dr, 0.0), (c0[0], dz)]
    restarts = 0
    for rc, zc in candidates:
        rc = min(max(rc, dom.rho_lo + pad), dom.rho_hi - pad)
        restarts += 1
        try:
            trial = solve_penalized(ctx, cfg, init_guess(ctx, (rc, zc)))
        except ConvergenceError:
            continue
        if trial.c_eps < best.c_eps:
            trial.upper_bound = bound
            best = trial
    best.restarts = restarts
    if best.c_eps > bound * (1 + cfg.guard_margin):
        best.upper_bound_violated = True
        best.flags.append("energy above concentration upper bound after restarts")
    return best
