"""Concentration diagnostics and eps-continuation sweeps."""

from dataclasses import dataclass, field
import logging
import math
import warnings

import numpy as np
from scipy.interpolate import RectBivariateSpline, RegularGridInterpolator

from .errors import ConfigError, ConvergenceError, DecayFitError, SolverError
from .limit2d import ConcentrationFunctionHandle, ground_state_for
from .potentials import cylindrical_ball_inside, hardy_H_radius
from .reduced import locate_peak
from .solver import SolveConfig, default_center, init_guess, solve, upper_bound

log = logging.getLogger(__name__)


def find_peak(grid, u):
    """``(rho, x3, |u|)`` at the maximum of ``|u|``, refined to sub-node accuracy.

    Raises
    ------
    ValueError
        For an identically zero field.
    """
    return locate_peak(grid, u)


def rescale_and_compare(grid, u, peak, eps, gs, radius=8.0, n=161):
    """Sup-distance between the rescaled modulus and the limit profile.

    The field is blown up about ``peak`` by the factor ``1/eps`` and
    compared with ``gs`` on the disc ``|y| <= radius``; the result is
    normalized by ``gs.w0``.  Parts of the disc that fall off the grid are
    dropped with a warning.
    """
    spline = RectBivariateSpline(grid.rho, grid.x3, np.abs(u), kx=3, ky=3)
    y = np.linspace(-radius, radius, n)
    Y1, Y2 = np.meshgrid(y, y, indexing="ij")
    disc = np.hypot(Y1, Y2) <= radius
    rho = peak[0] + eps * Y1
    x3 = peak[1] + eps * Y2
    on_grid = ((rho >= grid.rho_min) & (rho <= grid.rho_max)
               & (x3 >= grid.x3_min) & (x3 <= grid.x3_max))
    if np.any(disc & ~on_grid):
        warnings.warn("rescaled window exceeds the grid; truncating", RuntimeWarning,
                      stacklevel=2)
    mask = disc & on_grid
    v = spline.ev(rho[mask], x3[mask])
    w = gs(np.hypot(Y1[mask], Y2[mask]))
    return float(np.max(np.abs(v - w)) / gs.w0)


def check_penalization_inactive(ctx, u):
    """Number of nodes outside the domain where the pure power exceeds the cap."""
    m2 = np.abs(np.asarray(u)) ** 2
    R, Z = ctx.grid.mesh
    cap = ctx.cap_at(R, Z)
    outside = ~ctx.dom.contains(R, Z)
    f = ctx.nonlinear_coeff * m2 ** ((ctx.p - 2.0) / 2.0)
    return int(np.count_nonzero(outside & (f > cap)))


@dataclass(frozen=True)
class DecayFit:
    """Envelope ``|u| <= C exp(-(lam/eps) d/(1+d)) / (1+|x|)``.

    ``lam`` is the largest rate compatible with the fit nodes; ``lam_ls`` is
    the plain least-squares slope.
    """

    C: float
    lam: float
    lam_ls: float
    n_nodes: int
    max_excess: float

    @property
    def bound_holds(self):
        return self.max_excess <= 0.0


def _envelope_terms(grid, peak, eps):
    R, Z = grid.mesh
    d = np.hypot(R - peak[0], Z - peak[1])
    s = d / (eps * (1.0 + d))
    return d, s, np.log1p(np.hypot(R, Z))


def fit_decay_envelope(grid, u, peak, eps, noise=1e-12, r_core=1.0, min_nodes=20):
    """Fit the exponential decay envelope around the peak.

    Nodes above ``noise * max|u|`` and at distance at least ``r_core * eps``
    from the peak enter a least-squares fit of ``log|u| + log(1+|x|)``
    against ``d/(eps(1+d))``.  The intercept is then raised until the fitted
    line dominates every fit node, ``lam`` is the largest slope that keeps it
    so, and ``C`` is finally enlarged to cover the core nodes as well.

    Raises
    ------
    DecayFitError
        With fewer than ``min_nodes`` usable nodes.
    """
    m = np.abs(np.asarray(u))
    peak_val = float(m.max())
    if not peak_val > 0:
        raise DecayFitError("zero field")
    d, s, logx = _envelope_terms(grid, peak, eps)
    above = m > noise * peak_val
    fit = above & (d >= r_core * eps)
    if np.count_nonzero(fit) < min_nodes:
        raise DecayFitError(f"only {np.count_nonzero(fit)} nodes above the noise floor")
    y = np.log(m[fit]) + logx[fit]
    sf = s[fit]
    A = np.column_stack([np.ones_like(sf), -sf])
    (b, lam_ls), *_ = np.linalg.lstsq(A, y, rcond=None)
    b = max(b, float(np.max(y + lam_ls * sf)))
    lam = float(np.min((b - y) / sf))
    logC = b
    core = above & ~fit
    if np.any(core):
        yc = np.log(m[core]) + logx[core] + lam * s[core]
        logC = max(logC, float(np.max(yc)))
    bound = logC - lam * s[above] - logx[above]
    excess = float(np.max(np.log(m[above]) - bound))
    return DecayFit(C=float(math.exp(logC)), lam=lam, lam_ls=float(lam_ls),
                    n_nodes=int(np.count_nonzero(fit)), max_excess=max(excess, 0.0)
                    if excess > 1e-12 else 0.0)


def envelope_holds(grid, u, peak, eps, C, lam, noise=1e-12):
    """Whether ``|u| <= C exp(-(lam/eps) d/(1+d))/(1+|x|)`` above the noise floor."""
    m = np.abs(np.asarray(u))
    above = m > noise * m.max()
    _, s, logx = _envelope_terms(grid, peak, eps)
    bound = math.log(C) - lam * s - logx
    return bool(np.all(np.log(m[above]) <= bound[above] + 1e-12))


# --------------------------------------------------------------------------
# barrier function
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BarrierReport:
    """Outcome of the barrier test.

    ``hypothesis_ok``: ``lam^2 < (1 - mu) inf V`` over the domain closure.
    ``discrete_ok``: the operator inequality holds at every annulus node.
    """

    hypothesis_ok: bool
    discrete_ok: bool
    min_value: float
    scale: float
    n_nodes: int
    lam2: float
    threshold: float

    @property
    def passed(self):
        return self.hypothesis_ok and self.discrete_ok

    def __bool__(self):
        return self.passed


def _cyl_laplacian(grid, F):
    """Three-point cylindrical Laplacian at interior nodes (NaN on the edge)."""
    h, k = grid.h_rho, grid.h_x3
    rho = grid.rho[:, None]
    out = np.full(F.shape, np.nan)
    c = F[1:-1, 1:-1]
    if grid.planar:
        drr = (F[2:, 1:-1] - 2 * c + F[:-2, 1:-1]) / h**2
    else:
        rp = (rho[1:-1] + h / 2)
        rm = (rho[1:-1] - h / 2)
        drr = (rp * (F[2:, 1:-1] - c) - rm * (c - F[:-2, 1:-1])) / (rho[1:-1] * h**2)
    dzz = (F[1:-1, 2:] - 2 * c + F[1:-1, :-2]) / k**2
    out[1:-1, 1:-1] = drr + dzz
    return out


def barrier_inequality_check(ctx, peak, lam, R, r, inf_V=None, tol=1e-10):
    """Discrete test of the barrier inequality for ``cosh(lam (R - d)/eps)``.

    Checks ``-eps^2 (Δ + H) Φ + (1 - mu) V Φ >= -tol * scale`` on the
    annulus ``eps r < d < R`` around ``peak``, with Δ the three-point
    cylindrical Laplacian.

    Raises
    ------
    ConfigError
        If the ball of radius ``R`` around ``peak`` leaves the domain or the
        annulus is empty.
    """
    eps = ctx.eps
    problems = []
    if not cylindrical_ball_inside(ctx.dom, peak, R):
        problems.append(f"ball of radius {R} around {tuple(peak)} is not inside the domain")
    if not eps * r < R:
        problems.append(f"empty annulus: eps*r = {eps * r} >= R = {R}")
    if not lam > 0:
        problems.append("lambda must be positive")
    if problems:
        raise ConfigError(problems)
    if inf_V is None:
        from .potentials import _min_over_rectangle

        inf_V = _min_over_rectangle(ctx.scalar, ctx.dom, 512)
    mu = ctx.pen.mu
    threshold = (1.0 - mu) * inf_V
    g = ctx.grid
    Rm, Zm = g.mesh
    d = np.hypot(Rm - peak[0], Zm - peak[1])
    Phi = np.cosh(lam * (R - d) / eps)
    H = hardy_H_radius(ctx.pen, np.hypot(Rm, Zm))
    V = ctx.scalar(Rm, Zm)
    L = -eps**2 * (_cyl_laplacian(g, Phi) + H * Phi) + (1.0 - mu) * V * Phi
    ann = (d > eps * r) & (d < R)
    ann[[0, -1], :] = False
    ann[:, [0, -1]] = False
    vals = L[ann]
    scale = float(np.max(np.abs((1.0 - mu) * V[ann] * Phi[ann])))
    min_val = float(vals.min())
    return BarrierReport(
        hypothesis_ok=bool(lam**2 < threshold), discrete_ok=bool(min_val >= -tol * scale),
        min_value=min_val, scale=scale, n_nodes=int(ann.sum()), lam2=float(lam**2),
        threshold=float(threshold),
    )


def discrete_barrier_threshold(ctx, peak, R, r, lo=1e-3, hi=4.0, iters=40, inf_V=None):
    """Largest ``lam^2`` (by bisection) for which the discrete inequality holds."""
    def ok(l2):
        return barrier_inequality_check(ctx, peak, math.sqrt(l2), R, r, inf_V=inf_V).discrete_ok

    if not ok(lo):
        return 0.0
    if ok(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

@dataclass
class SweepRecord:
    eps: float
    c_eps_over_eps2: float = float("nan")
    peak_rho: float = float("nan")
    peak_x3: float = float("nan")
    peak_value: float = float("nan")
    M_at_peak: float = float("nan")
    upper_bound_over_eps2: float = float("nan")
    energy_norm_over_eps2: float = float("nan")
    profile_error: float = float("nan")
    decay_rate: float = float("nan")
    decay_rate_ls: float = float("nan")
    decay_C: float = float("nan")
    penalization_violations: int = -1
    barrier_check: bool = False
    distance_to_boundary: float = float("nan")
    iterations: int = 0
    residual: float = float("nan")
    converged: bool = False
    failure: str = ""

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class SweepReport:
    records: list
    inf_segment_M: float
    rho_star: float
    grid: dict
    fields: dict = field(default_factory=dict, repr=False)

    def as_dict(self):
        return {
            "records": [r.as_dict() for r in self.records],
            "inf_segment_M": self.inf_segment_M,
            "rho_star": self.rho_star,
            "grid": self.grid,
        }

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def warm_start(grid, u_prev, peak, eps_prev, eps_new):
    """Previous solution stretched about its peak by ``eps_new / eps_prev``."""
    R, Z = grid.mesh
    scale = eps_prev / eps_new
    pts = np.stack([peak[0] + (R - peak[0]) * scale, peak[1] + (Z - peak[1]) * scale], -1)
    interp = RegularGridInterpolator((grid.rho, grid.x3), u_prev, method="linear",
                                     bounds_error=False, fill_value=0.0)
    u = interp(pts)
    u[0, :] = u[-1, :] = u[:, 0] = u[:, -1] = 0
    return u


def sweep(ctx, eps_list, cfg=None, keep_fields=False, barrier_R=0.3, barrier_r=1.0):
    """Solve along decreasing ``eps`` and collect all diagnostics.

    Failed solves produce records with ``failure`` set; the sweep goes on.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    cfg = cfg or SolveConfig()
    from .potentials import _min_over_rectangle

    handle = ConcentrationFunctionHandle(V=ctx.scalar, c=ctx.magnetic.c, p=ctx.p)
    mfun = (lambda r, z: handle.scale * _shape_for(ctx, r, z))  # noqa: E731
    inf_V = _min_over_rectangle(ctx.scalar, ctx.dom, 512)
    center = default_center(ctx)
    inf_M = upper_bound(ctx.with_eps(1.0))
    records = []
    fields = {}
    prev = None
    for eps in eps_list:
        c = ctx.with_eps(eps)
        rec = SweepRecord(eps=eps)
        records.append(rec)
        if prev is None:
            init = init_guess(c, center)
        else:
            init = warm_start(c.grid, prev.u, prev.peak, prev.eps, eps)
        try:
            res = solve(c, cfg, center=center, init=init)
        except ConvergenceError as exc:
            rec.failure = str(exc)
            res = exc.result
            if res is None:
                continue
        except SolverError as exc:
            rec.failure = str(exc)
            continue
        prev = res
        _fill_record(rec, c, res, mfun, inf_V, barrier_R, barrier_r)
        if keep_fields:
            fields[eps] = res.u
    return SweepReport(records=records, inf_segment_M=float(inf_M), rho_star=float(center[0]),
                       grid=ctx.grid.as_dict(), fields=fields)


def _shape_for(ctx, rho, x3):
    from .solver import concentration_shape

    return concentration_shape(ctx, np.asarray(rho, float), np.asarray(x3, float))


def _fill_record(rec, ctx, res, mfun, inf_V, barrier_R, barrier_r):
    eps = ctx.eps
    g = ctx.grid
    rec.c_eps_over_eps2 = res.c_eps / eps**2
    rec.peak_rho, rec.peak_x3 = map(float, res.peak)
    rec.peak_value = res.peak_value
    rec.iterations = res.iterations
    rec.residual = res.residual
    rec.converged = res.converged
    rec.upper_bound_over_eps2 = res.upper_bound / eps**2
    rec.energy_norm_over_eps2 = res.energy_norm / eps**2
    peak = res.peak
    try:
        rec.M_at_peak = float(mfun(np.array([peak[0]]), np.array([peak[1]]))[0])
    except ValueError:
        pass
    a0 = float(ctx.coefficient(np.array([peak[0]]), np.array([peak[1]]))[0])
    gs = ground_state_for(a0, ctx.p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rec.profile_error = rescale_and_compare(g, res.u, peak, eps, gs)
    try:
        fit = fit_decay_envelope(g, res.u, peak, eps)
        rec.decay_rate, rec.decay_rate_ls, rec.decay_C = fit.lam, fit.lam_ls, fit.C
    except DecayFitError as exc:
        log.warning("decay fit failed at eps=%g: %s", eps, exc)
    rec.penalization_violations = check_penalization_inactive(ctx, res.u)
    rec.distance_to_boundary = float(ctx.dom.distance_to_boundary(*peak))
    R = min(barrier_R, 0.9 * rec.distance_to_boundary)
    lam = math.sqrt(0.9 * (1 - ctx.pen.mu) * inf_V) if inf_V > 0 else 0.0
    try:
        rec.barrier_check = bool(barrier_inequality_check(ctx, peak, lam, R, barrier_r,
                                                          inf_V=inf_V))
    except ConfigError:
        rec.barrier_check = False
