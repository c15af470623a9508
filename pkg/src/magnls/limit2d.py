"""Planar limit problem, ground energy and the concentration function.

The limit equation is ``-Δw + a0 w = |w|^(p-2) w`` in the plane.  Its radial
ground state is computed by shooting on the initial height; the resulting
energy ``E(0, a0)`` feeds the concentration function

    M(rho, x3) = 2 pi rho (c^2 + V)^(2/(p-2)) E(0, 1)

whose minimizers on the plane ``x3 = 0`` predict where solutions concentrate.
"""

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
import math

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import k0, k1

from ._numerics import scan_then_golden
from .errors import ConvergenceError, DomainError, SolverError
from .potentials import _min_over_rectangle

NORMALIZATIONS = ("with-2pi", "normalized")


# --------------------------------------------------------------------------
# radial ground state
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroundState1D:
    """Positive radial solution of the planar limit equation.

    ``r``, ``w`` and ``dw`` sample the profile and its derivative on a
    uniform grid of ``[0, r_max]``.  Beyond ``r_match`` the profile is the
    modified Bessel tail ``tail_B * K0(sqrt(a0) r)``.
    """

    a0: float
    p: float
    r: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    r_match: float
    tail_B: float
    energy: float = field(init=False)
    mass: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "energy", ground_energy(self))
        object.__setattr__(self, "mass", float(2 * np.pi * simpson(self.w**2 * self.r, x=self.r)))

    @property
    def r_max(self):
        return float(self.r[-1])

    @property
    def w0(self):
        return float(self.w[0])

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.r, self.w, self.dw)

    def __call__(self, r):
        """Profile value at radius ``r`` (any shape, any nonnegative value)."""
        r = np.abs(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        inside = r <= self.r_max
        out[inside] = self._spline(r[inside])
        far = ~inside
        out[far] = self.tail_B * k0(math.sqrt(self.a0) * r[far])
        return out

    def nehari_defect(self):
        """Relative mismatch between the quadratic part and ``∫ w^p``."""
        q = 2 * np.pi * simpson((self.dw**2 + self.a0 * self.w**2) * self.r, x=self.r)
        n = 2 * np.pi * simpson(self.w**self.p * self.r, x=self.r)
        return float(abs(q - n) / n)

    def ode_residual(self):
        """Largest relative ODE residual over interior sample nodes.

        Second derivatives come from central differences of ``dw``, so the
        value also carries an O(h^2) sampling error.
        """
        r, w, dw = self.r, self.w, self.dw
        h = r[1] - r[0]
        d2w = (dw[2:] - dw[:-2]) / (2 * h)
        res = d2w + dw[1:-1] / r[1:-1] - self.a0 * w[1:-1] + w[1:-1] ** (self.p - 1)
        return float(np.max(np.abs(res)) / self.w0 ** (self.p - 1))

    def rescaled(self, a0):
        """Ground state for another coefficient via the exact scaling law.

        ``a0^(1/(p-2)) w(sqrt(a0) r)`` solves the equation with coefficient
        ``a0`` when ``w`` solves it with coefficient ``self.a0``.
        """
        lam = a0 / self.a0
        amp = lam ** (1.0 / (self.p - 2))
        s = math.sqrt(lam)
        return GroundState1D(
            a0=float(a0), p=self.p, r=self.r / s, w=amp * self.w, dw=amp * s * self.dw,
            r_match=self.r_match / s, tail_B=amp * self.tail_B,
        )


def _shoot(w0, a0, p, r_end, rtol, dense=False):
    """Integrate from a series start; return (+1 overshoot | -1 undershoot | 0, sol)."""
    r0 = 1e-4 / math.sqrt(a0)
    s = a0 * w0 - w0 ** (p - 1)
    y0 = [w0 + r0 * r0 * s / 4.0, r0 * s / 2.0]

    def rhs(r, y):
        w = y[0]
        return [y[1], -y[1] / r + a0 * w - abs(w) ** (p - 2) * w]

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    def turn_up(r, y):
        return y[1]

    turn_up.terminal = True
    turn_up.direction = 1

    sol = solve_ivp(rhs, (r0, r_end), y0, method="DOP853", rtol=rtol, atol=1e-15 * w0,
                    events=[hit_zero, turn_up], dense_output=dense)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def solve_limit_ground_state(a0, p, tol=1e-8, *, r_max=None, n_samples=8001,
                             tail_tol=1e-6, rtol=1e-10, max_doublings=60):
    """Radial ground state of ``-Δw + a0 w = w^(p-1)`` by shooting.

    Parameters
    ----------
    a0 : float
        Linear coefficient, positive.
    p : float
        Exponent, ``p > 2``.
    tol : float
        Accepted relative Nehari defect of the final profile.
    r_max : float, optional
        Sampling radius, default ``20 / sqrt(a0)``.
    tail_tol : float
        The integrated profile is kept until ``w`` falls to ``tail_tol * w(0)``;
        beyond that it is replaced by the Bessel tail.

    Raises
    ------
    SolverError
        If no overshooting height is found.
    ConvergenceError
        If the Nehari identity misses ``tol``; ``result`` holds the defect.
    """
    a0 = float(a0)
    p = float(p)
    if not a0 > 0:
        raise DomainError(f"a0 must be positive, got {a0}")
    if not p > 2:
        raise DomainError(f"p must exceed 2, got {p}")
    sa = math.sqrt(a0)
    if r_max is None:
        r_max = 20.0 / sa
    r_end = r_max

    # heights at or below the constant solution always undershoot
    lo = a0 ** (1.0 / (p - 2))
    hi = 2.0 * lo
    for _ in range(max_doublings):
        if _shoot(hi, a0, p, r_end, rtol)[0] > 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise SolverError(f"no overshooting height below {hi:g} for a0={a0}, p={p}")

    while hi - lo > 4.0 * np.finfo(float).eps * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        kind, _ = _shoot(mid, a0, p, r_end, rtol)
        if kind > 0:
            hi = mid
        else:
            lo = mid

    # the undershooting branch tracks the decaying solution furthest out
    w0 = lo
    _, sol = _shoot(w0, a0, p, r_end, rtol, dense=True)
    r_fine = np.linspace(sol.t[0], sol.t[-1], 20001)
    w_fine = sol.sol(r_fine)[0]
    below = np.nonzero(w_fine <= tail_tol * w0)[0]
    if below.size == 0:
        raise ConvergenceError(
            f"shooting profile never fell below {tail_tol:g} * w(0) (min ratio "
            f"{w_fine.min() / w0:.3g})", result=float(w_fine.min() / w0))
    r_match = float(r_fine[below[0]])
    r_match = min(r_match, r_max)

    r = np.linspace(0.0, r_max, n_samples)
    w = np.empty_like(r)
    dw = np.empty_like(r)
    core = r < sol.t[0]
    # series start near the origin
    s = a0 * w0 - w0 ** (p - 1)
    w[core] = w0 + r[core] ** 2 * s / 4.0
    dw[core] = r[core] * s / 2.0
    mid_mask = (~core) & (r <= r_match)
    y = sol.sol(r[mid_mask])
    w[mid_mask], dw[mid_mask] = y[0], y[1]
    w_m = sol.sol(r_match)[0]
    B = float(w_m / k0(sa * r_match))
    tail = r > r_match
    w[tail] = B * k0(sa * r[tail])
    dw[tail] = -B * sa * k1(sa * r[tail])

    gs = GroundState1D(a0=a0, p=p, r=r, w=w, dw=dw, r_match=r_match, tail_B=B)
    defect = gs.nehari_defect()
    if defect > tol:
        raise ConvergenceError(
            f"Nehari defect {defect:.3e} exceeds tolerance {tol:.1e}", result=defect)
    return gs


def ground_energy(gs):
    """``(1/2 - 1/p) 2π ∫ (w'^2 + a0 w^2) r dr``, the energy on the Nehari manifold."""
    integrand = (gs.dw**2 + gs.a0 * gs.w**2) * gs.r
    return float((0.5 - 1.0 / gs.p) * 2 * np.pi * simpson(integrand, x=gs.r))


@lru_cache(maxsize=None)
def unit_ground_state(p):
    """Ground state for ``a0 = 1``, computed once per exponent."""
    return solve_limit_ground_state(1.0, float(p))


def ground_energy_unit(p):
    """``E(0, 1)`` for exponent ``p`` (cached)."""
    return unit_ground_state(float(p)).energy


def ground_state_for(a0, p):
    """Ground state for coefficient ``a0`` rescaled from the cached unit profile."""
    return unit_ground_state(float(p)).rescaled(a0)


# --------------------------------------------------------------------------
# planar gauge and limit functional
# --------------------------------------------------------------------------

def gauge_transform(u, A0, y1, y2, direction="add"):
    """Multiply ``u`` by ``exp(±i A0·y)``.

    ``add`` maps a zero-field function to its counterpart for the constant
    potential ``A0``; ``remove`` undoes it.
    """
    if direction not in ("add", "remove"):
        raise ValueError(f"direction must be 'add' or 'remove', got {direction!r}")
    sign = 1.0 if direction == "add" else -1.0
    phase = A0[0] * np.asarray(y1) + A0[1] * np.asarray(y2)
    return np.asarray(u) * np.exp(sign * 1j * phase)


def planar_limit_energy(u, h, A0, a0, p):
    """Discrete ``½∫|(i∇ + A0)u|^2 + a0|u|^2 - (1/p)∫|u|^p`` on a square grid.

    ``u`` holds values at the nodes of a uniform grid with spacing ``h`` in
    both directions and is taken to vanish outside.  Each edge contributes
    ``|i(u_b - u_a)/h + A0_e (u_a + u_b)/2|^2``.
    """
    u = np.asarray(u, dtype=complex)
    up = np.pad(u, 1)
    kin = 0.0
    for axis, a in ((0, A0[0]), (1, A0[1])):
        ua = up[:-1, :] if axis == 0 else up[:, :-1]
        ub = up[1:, :] if axis == 0 else up[:, 1:]
        d = 1j * (ub - ua) / h + a * (ua + ub) / 2.0
        kin += float(np.sum(np.abs(d) ** 2))
    mod2 = np.abs(u) ** 2
    quad = (kin + a0 * float(np.sum(mod2))) * h * h
    return 0.5 * quad - float(np.sum(mod2 ** (p / 2.0))) * h * h / p


# --------------------------------------------------------------------------
# concentration function
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConcentrationFunctionHandle:
    """Evaluable concentration function.

    ``c`` is any callable ``c(rho, x3)``; a :class:`CylMagneticPotential`'s
    ``c`` method fits.  ``e01`` defaults to the cached shooting value.
    """

    V: object
    c: object
    p: float
    e01: float = None
    normalization: str = "with-2pi"

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if not self.p > 2:
            raise ValueError("p must exceed 2")

    @classmethod
    def from_potentials(cls, magnetic, scalar, p, **kw):
        return cls(V=scalar, c=magnetic.c, p=p, **kw)

    def coefficient(self, rho, x3):
        """``c^2 + V`` evaluated through ``|x3|``."""
        z = np.abs(np.asarray(x3, dtype=float))
        return np.asarray(self.c(rho, z), float) ** 2 + np.asarray(self.V(rho, z), float)

    @cached_property
    def scale(self):
        if self.normalization == "normalized":
            return 1.0
        e01 = self.e01 if self.e01 is not None else ground_energy_unit(self.p)
        return 2 * np.pi * e01

    def shape(self, rho, x3):
        """``rho (c^2 + V)^(2/(p-2))``, the concentration function without its constant."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0):
            raise DomainError("concentration function needs rho > 0")
        a = self.coefficient(rho, x3)
        if np.any(~(a > 0)):
            raise DomainError("c^2 + V must be positive for the ground energy to exist")
        return rho * a ** (2.0 / (self.p - 2))

    def __call__(self, rho, x3):
        return concentration_M(self, rho, x3)


def concentration_M(handle, rho, x3):
    """Concentration function at ``(rho, x3)``."""
    return handle.scale * handle.shape(rho, x3)


@dataclass(frozen=True)
class MinimizeResult:
    rho_star: float
    x3_star: float
    m_min: float
    inf_closure: float


def minimize_M(handle, dom, tol=1e-13, n=2048):
    """Minimize the concentration function on the segment ``x3 = 0`` of the closure.

    The location is found from the constant-free shape, so the ground energy
    is only needed for the reported values.
    """
    seg = lambda r: handle.shape(r, np.zeros_like(r))  # noqa: E731
    rho_star, s_min = scan_then_golden(seg, dom.rho_lo, dom.rho_hi, n=n, tol=tol)
    s_closure = min(_min_over_rectangle(handle.shape, dom, n), s_min)
    scale = handle.scale
    return MinimizeResult(float(rho_star), 0.0, float(scale * s_min), float(scale * s_closure))
