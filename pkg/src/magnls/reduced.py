"""Discretization of the cylindrically reduced magnetic problem.

Functions of ``(rho, x3)`` live on the nodes of a uniform grid of the
truncated half-plane and vanish on its four edges.  The quadratic form is
assembled edge by edge,

    Q(u) = sum_edges w_e |i eps (u_b - u_a)/h + A_e (u_a + u_b)/2|^2
           + sum_nodes W_n coef_n |u_n|^2,

with ``A_e`` the normal (``phi``) or axial (``a3``) potential at the edge
midpoint, ``w_e = 2 pi rho_e h_rho h_x3`` and ``W_n = 2 pi rho_n h_rho h_x3``.
Differentiating this form produces the cylindrical first-order term and the
magnetic cross terms with exact discrete self-adjointness, and the
reverse triangle inequality on each edge makes the discrete diamagnetic
inequality hold without slack.
"""

from dataclasses import dataclass
from functools import cached_property
import json
import math

import numpy as np
import scipy.sparse as sp

from .errors import DomainError
from .potentials import (
    CylMagneticPotential,
    ConcentrationDomain,
    PenalizationParams,
    ScalarPotential,
    hardy_H_radius,
)

FIELD_MAGIC = "magnls-field"


@dataclass(frozen=True)
class HalfPlaneGrid:
    """Uniform node grid on ``[rho_min, rho_max] x [x3_min, x3_max]``.

    With ``planar=True`` the measure is plain ``drho dx3`` instead of
    ``2 pi rho drho dx3``, which turns the same machinery into a solver for
    problems posed in the plane (``rho`` then acts as a Cartesian coordinate).
    """

    rho_min: float = 0.1
    rho_max: float = 4.0
    x3_min: float = -2.0
    x3_max: float = 2.0
    n_rho: int = 256
    n_x3: int = 256
    planar: bool = False

    def __post_init__(self):
        if not self.planar and not self.rho_min > 0:
            raise ValueError("rho_min must be positive (axis excluded)")
        if not (self.rho_max > self.rho_min and self.x3_max > self.x3_min):
            raise ValueError("empty grid extent")
        if self.n_rho < 4 or self.n_x3 < 4:
            raise ValueError("need at least 4 nodes per direction")

    @property
    def h_rho(self):
        return (self.rho_max - self.rho_min) / (self.n_rho - 1)

    @property
    def h_x3(self):
        return (self.x3_max - self.x3_min) / (self.n_x3 - 1)

    @property
    def shape(self):
        return (self.n_rho, self.n_x3)

    @property
    def interior_shape(self):
        return (self.n_rho - 2, self.n_x3 - 2)

    @cached_property
    def rho(self):
        return np.linspace(self.rho_min, self.rho_max, self.n_rho)

    @cached_property
    def x3(self):
        return np.linspace(self.x3_min, self.x3_max, self.n_x3)

    @cached_property
    def mesh(self):
        return np.meshgrid(self.rho, self.x3, indexing="ij")

    def density(self, rho):
        """Measure density: ``2 pi rho`` or 1 for planar grids."""
        rho = np.asarray(rho, dtype=float)
        return np.ones_like(rho) if self.planar else 2 * np.pi * rho

    @cached_property
    def node_weights(self):
        """Quadrature weights at all nodes (boundary rows included)."""
        w = self.density(self.rho)[:, None] * np.ones(self.n_x3)[None, :]
        return w * self.h_rho * self.h_x3

    def interior(self, u):
        """Flattened interior values of a full-grid array."""
        return np.asarray(u)[1:-1, 1:-1].ravel()

    def embed(self, v, dtype=complex):
        """Full-grid array with interior values ``v`` and zero boundary."""
        out = np.zeros(self.shape, dtype=dtype)
        out[1:-1, 1:-1] = np.asarray(v).reshape(self.interior_shape)
        return out

    def refined(self, factor=2):
        """Grid with the spacing divided by ``factor`` (same extent)."""
        return HalfPlaneGrid(self.rho_min, self.rho_max, self.x3_min, self.x3_max,
                             factor * (self.n_rho - 1) + 1, factor * (self.n_x3 - 1) + 1,
                             self.planar)

    def as_dict(self):
        return {"rho_min": self.rho_min, "rho_max": self.rho_max, "x3_min": self.x3_min,
                "x3_max": self.x3_max, "n_rho": self.n_rho, "n_x3": self.n_x3,
                "planar": self.planar}

    def contains_with_margin(self, dom, margin=0.1):
        """Whether the closure of ``dom`` sits inside the grid with a relative margin."""
        mr = margin * (self.rho_max - self.rho_min)
        mz = margin * (self.x3_max - self.x3_min)
        return (dom.rho_lo - self.rho_min >= mr and self.rho_max - dom.rho_hi >= mr
                and -dom.x3_half_width - self.x3_min >= mz
                and self.x3_max - dom.x3_half_width >= mz)


def check_field(grid, u):
    """Validate a complex field: shape, finite values, zero boundary."""
    u = np.asarray(u)
    if u.shape != grid.shape:
        raise ValueError(f"field shape {u.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("field has non-finite values")
    edges = np.concatenate([u[0], u[-1], u[:, 0], u[:, -1]])
    if np.any(edges != 0):
        raise ValueError("field does not vanish on the grid boundary")
    return u


@dataclass(frozen=True, eq=False)
class ReducedContext:
    """Everything needed to evaluate the penalized functional on a grid.

    Parameters
    ----------
    effective_potential : callable, optional
        Replaces ``c^2 + V`` as the zeroth-order coefficient (``f(rho, x3)``).
    nonlinear_coeff : float
        Multiplies the pure power ``f(s)`` (also inside the penalization min).
    """

    eps: float
    grid: HalfPlaneGrid
    magnetic: CylMagneticPotential
    scalar: ScalarPotential
    pen: PenalizationParams
    dom: ConcentrationDomain
    p: float
    effective_potential: object = None
    nonlinear_coeff: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.p > 2:
            raise ValueError(f"p must exceed 2, got {self.p}")
        if not self.nonlinear_coeff > 0:
            raise ValueError("nonlinear_coeff must be positive")

    def with_eps(self, eps):
        return ReducedContext(eps, self.grid, self.magnetic, self.scalar, self.pen, self.dom,
                              self.p, self.effective_potential, self.nonlinear_coeff)

    def with_grid(self, grid):
        return ReducedContext(self.eps, grid, self.magnetic, self.scalar, self.pen, self.dom,
                              self.p, self.effective_potential, self.nonlinear_coeff)

    # -- nodal data on interior nodes (flattened) --------------------------

    @cached_property
    def _interior_mesh(self):
        R, Z = self.grid.mesh
        return R[1:-1, 1:-1].ravel(), Z[1:-1, 1:-1].ravel()

    @cached_property
    def weights(self):
        return self.grid.interior(self.grid.node_weights)

    @cached_property
    def coef(self):
        """Zeroth-order coefficient ``c^2 + V`` (or the effective potential)."""
        return self.coefficient(*self._interior_mesh)

    def coefficient(self, rho, x3):
        if self.effective_potential is not None:
            return np.asarray(self.effective_potential(rho, x3), dtype=float)
        return self.magnetic.c(rho, x3) ** 2 + self.scalar(rho, x3)

    @cached_property
    def inside(self):
        return self.dom.contains(*self._interior_mesh)

    def cap_at(self, rho, x3):
        """``eps^2 H + mu V`` outside the domain, ``+inf`` inside."""
        rho = np.asarray(rho, dtype=float)
        x3 = np.asarray(x3, dtype=float)
        r = np.hypot(rho, x3)
        cap = self.eps**2 * hardy_H_radius(self.pen, r) + self.pen.mu * self.scalar(rho, x3)
        return np.where(self.dom.contains(rho, x3), np.inf, cap)

    @cached_property
    def cap(self):
        return self.cap_at(*self._interior_mesh)

    @property
    def is_real(self):
        """True when no phase coupling is present and the operator is real."""
        return self.magnetic.is_planar_free

    # -- edge data ----------------------------------------------------------

    @cached_property
    def edge_data(self):
        """Edge midpoint potentials and weights for both directions."""
        g = self.grid
        rho_mid = 0.5 * (g.rho[:-1] + g.rho[1:])
        x3_mid = 0.5 * (g.x3[:-1] + g.x3[1:])
        Rr, Zr = np.meshgrid(rho_mid, g.x3, indexing="ij")
        Rz, Zz = np.meshgrid(g.rho, x3_mid, indexing="ij")
        phi_e = self.magnetic.phi(Rr, Zr)
        a3_e = self.magnetic.a3(Rz, Zz)
        w_r = g.density(Rr) * g.h_rho * g.h_x3
        w_z = g.density(Rz) * g.h_rho * g.h_x3
        return phi_e, w_r, a3_e, w_z

    @cached_property
    def K(self):
        """Sparse Hermitian matrix of the quadratic form on interior unknowns."""
        g = self.grid
        ni, nj = g.interior_shape
        idx = -np.ones(g.shape, dtype=np.int64)
        idx[1:-1, 1:-1] = np.arange(ni * nj).reshape(ni, nj)
        phi_e, w_r, a3_e, w_z = self.edge_data
        rows, cols, vals = [], [], []
        eps = self.eps
        for A_e, w_e, h, axis in ((phi_e, w_r, g.h_rho, 0), (a3_e, w_z, g.h_x3, 1)):
            if axis == 0:
                ia, ib = idx[:-1, :], idx[1:, :]
            else:
                ia, ib = idx[:, :-1], idx[:, 1:]
            alpha = 1j * eps / h + A_e / 2.0
            beta = 1j * eps / h - A_e / 2.0
            diag = w_e * np.abs(alpha) ** 2  # equals w |beta|^2
            off = -w_e * np.conj(alpha) * beta  # coefficient of conj(u_b) u_a
            for ii, mask in ((ia, ia >= 0), (ib, ib >= 0)):
                rows.append(ii[mask])
                cols.append(ii[mask])
                vals.append(diag[mask].astype(complex))
            both = (ia >= 0) & (ib >= 0)
            rows += [ib[both], ia[both]]
            cols += [ia[both], ib[both]]
            vals += [off[both], np.conj(off[both])]
        n = ni * nj
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append((self.weights * self.coef).astype(complex))
        K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsc()
        K.sum_duplicates()
        if self.is_real:
            K = sp.csc_matrix((np.ascontiguousarray(K.data.real), K.indices.copy(),
                               K.indptr.copy()), shape=K.shape)
        return K


# --------------------------------------------------------------------------
# magnetic gradient and quadratic form
# --------------------------------------------------------------------------

def magnetic_gradient(ctx, u):
    """Edge values of ``(i eps d_rho + phi) u`` and ``(i eps d_x3 + a3) u``.

    Returns arrays of shape ``(n_rho - 1, n_x3)`` and ``(n_rho, n_x3 - 1)``;
    entry ``[i, j]`` sits at the midpoint between node ``i`` (resp. ``j``) and
    its successor, where the difference quotient is centered.
    """
    u = np.asarray(u, dtype=complex)
    g = ctx.grid
    phi_e, _, a3_e, _ = ctx.edge_data
    d_rho = 1j * ctx.eps * (u[1:, :] - u[:-1, :]) / g.h_rho + phi_e * (u[1:, :] + u[:-1, :]) / 2
    d_x3 = 1j * ctx.eps * (u[:, 1:] - u[:, :-1]) / g.h_x3 + a3_e * (u[:, 1:] + u[:, :-1]) / 2
    return d_rho, d_x3


def gradient_part(ctx, u):
    """Weighted sum of squared magnetic derivatives over all edges."""
    d_rho, d_x3 = magnetic_gradient(ctx, u)
    _, w_r, _, w_z = ctx.edge_data
    return float(np.sum(w_r * np.abs(d_rho) ** 2) + np.sum(w_z * np.abs(d_x3) ** 2))


def modulus_gradient_part(ctx, u):
    """``eps^2`` times the weighted squared gradient of ``|u|`` (zero field)."""
    m = np.abs(np.asarray(u))
    g = ctx.grid
    _, w_r, _, w_z = ctx.edge_data
    dr = (m[1:, :] - m[:-1, :]) / g.h_rho
    dz = (m[:, 1:] - m[:, :-1]) / g.h_x3
    return float(ctx.eps**2 * (np.sum(w_r * dr**2) + np.sum(w_z * dz**2)))


def hardy_part(ctx, u):
    """``eps^2/4`` times the weighted integral of ``|u|^2 / |x|^2``."""
    R, Z = ctx.grid.mesh
    W = ctx.grid.node_weights
    return float(ctx.eps**2 / 4.0 * np.sum(W * np.abs(u) ** 2 / (R**2 + Z**2)))


def _quad(ctx, v):
    return float(np.real(np.vdot(v, ctx.K @ v)))


def energy_norm(ctx, u):
    """Discrete squared magnetic norm of a full-grid field."""
    return _quad(ctx, ctx.grid.interior(u))


# --------------------------------------------------------------------------
# penalized nonlinearity
# --------------------------------------------------------------------------

def _g(cap, s, p, gamma=1.0):
    f = gamma * s ** ((p - 2.0) / 2.0)
    return np.minimum(cap, f)


def _G(cap, s, p, gamma=1.0):
    """Half the primitive of ``_g`` in ``s``, closed form on both branches."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        s_star = (cap / gamma) ** (2.0 / (p - 2.0))
        pure = gamma * s ** (p / 2.0) / p
        capped = gamma * s_star ** (p / 2.0) / p + 0.5 * cap * (s - s_star)
    return np.where(s <= s_star, pure, capped)


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("s must be nonnegative")
    return s


def g_eps(ctx, x, s):
    """Penalized nonlinearity at point(s) ``x = (rho, x3)`` and level ``s``."""
    s = _check_s(s)
    cap = ctx.cap_at(x[0], x[1])
    return _g(cap, s, ctx.p, ctx.nonlinear_coeff)


def G_eps(ctx, x, s):
    """``(1/2) ∫_0^s g_eps(x, σ) dσ``."""
    s = _check_s(s)
    cap = ctx.cap_at(x[0], x[1])
    return _G(cap, s, ctx.p, ctx.nonlinear_coeff)


# --------------------------------------------------------------------------
# functional and gradient on interior vectors
# --------------------------------------------------------------------------

def _J_vec(ctx, v, Kv=None):
    Kv = ctx.K @ v if Kv is None else Kv
    q = float(np.real(np.vdot(v, Kv)))
    s = np.abs(v) ** 2
    return 0.5 * q - float(np.sum(ctx.weights * _G(ctx.cap, s, ctx.p, ctx.nonlinear_coeff)))


def _dual_grad_vec(ctx, v, Kv=None):
    """Dual representation ``K v - W g v`` of the derivative."""
    Kv = ctx.K @ v if Kv is None else Kv
    s = np.abs(v) ** 2
    return Kv - ctx.weights * _g(ctx.cap, s, ctx.p, ctx.nonlinear_coeff) * v


def J_eps(ctx, u):
    """Penalized functional ``Q/2 - ∫ G_eps(x, |u|^2)``."""
    return _J_vec(ctx, ctx.grid.interior(u).astype(complex))


def dJ_eps(ctx, u, v):
    """Gateaux derivative of the functional at ``u`` in direction ``v``."""
    d = _dual_grad_vec(ctx, ctx.grid.interior(u).astype(complex))
    return float(np.real(np.vdot(ctx.grid.interior(v), d)))


def grad_J_eps(ctx, u):
    """Riesz representative of the derivative in the weighted L^2 product."""
    d = _dual_grad_vec(ctx, ctx.grid.interior(u).astype(complex))
    return ctx.grid.embed(d / ctx.weights)


def inner(ctx, a, b):
    """Weighted real inner product ``Re ∫ conj(a) b``."""
    W = ctx.grid.node_weights
    return float(np.real(np.sum(W * np.conj(a) * b)))


# --------------------------------------------------------------------------
# post-hoc residual with a fourth-order stencil
# --------------------------------------------------------------------------

def _d1(u, h, axis):
    """Fourth-order centered first derivative (valid two nodes from the edge)."""
    s = lambda k: np.roll(u, -k, axis=axis)  # noqa: E731
    return (-s(2) + 8 * s(1) - 8 * s(-1) + s(-2)) / (12 * h)


def _d2(u, h, axis):
    s = lambda k: np.roll(u, -k, axis=axis)  # noqa: E731
    return (-s(2) + 16 * s(1) - 30 * u + 16 * s(-1) - s(-2)) / (12 * h * h)


def _fd_fun(f, rho, x3, axis, step=1e-4):
    if axis == 0:
        return (f(rho + step, x3) - f(rho - step, x3)) / (2 * step)
    return (f(rho, x3 + step) - f(rho, x3 - step)) / (2 * step)


def pde_residual(ctx, u):
    """Relative weighted residual of the continuous penalized equation.

    The reduced operator ``(1/w) D_rho(w D_rho u) + D_3 D_3 u + coef u`` with
    ``D = i eps d + A`` and ``w`` the measure density is applied with
    fourth-order differences on nodes at least two cells from the edge, so
    the value measures the truncation error of the second-order scheme.
    """
    u = np.asarray(u, dtype=complex)
    g = ctx.grid
    R, Z = g.mesh
    eps = ctx.eps
    phi = ctx.magnetic.phi(R, Z)
    a3 = ctx.magnetic.a3(R, Z)
    if ctx.is_real:
        dphi = da3 = 0.0
    else:
        dphi = _fd_fun(ctx.magnetic.phi, R, Z, 0)
        da3 = _fd_fun(ctx.magnetic.a3, R, Z, 1)
    ur, uz = _d1(u, g.h_rho, 0), _d1(u, g.h_x3, 1)
    urr, uzz = _d2(u, g.h_rho, 0), _d2(u, g.h_x3, 1)
    Dr = 1j * eps * ur + phi * u
    lap = -eps**2 * urr + 1j * eps * (dphi * u + 2 * phi * ur) + phi**2 * u
    lap += -eps**2 * uzz + 1j * eps * (da3 * u + 2 * a3 * uz) + a3**2 * u
    if not g.planar:
        lap += 1j * eps / R * Dr
    coef = g.embed(ctx.coef, dtype=float)
    s = np.abs(u) ** 2
    cap = g.embed(ctx.cap, dtype=float)
    gs = _g(cap, s, ctx.p, ctx.nonlinear_coeff)
    res = lap + coef * u - gs * u
    W = g.node_weights
    sl = (slice(2, -2), slice(2, -2))
    num = np.sum(W[sl] * np.abs(res[sl]) ** 2)
    den = np.sum(W[sl] * np.abs(u[sl]) ** 2)
    return float(math.sqrt(num / den)) if den > 0 else 0.0


# --------------------------------------------------------------------------
# field IO
# --------------------------------------------------------------------------

def save_field(path, grid, u, eps, p, extra=None):
    """Binary container: one JSON header line, then little-endian f64 (re, im) pairs."""
    u = np.asarray(u, dtype=complex)
    header = {"format": FIELD_MAGIC, "grid": grid.as_dict(), "eps": float(eps), "p": float(p),
              "layout": "row-major [i_rho, j_x3], interleaved re/im, float64 little-endian"}
    if extra:
        header.update(extra)
    data = np.empty(u.shape + (2,), dtype="<f8")
    data[..., 0] = u.real
    data[..., 1] = u.imag
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(data.tobytes(order="C"))


def load_field(path):
    """Inverse of :func:`save_field`; returns ``(header, grid, u)``."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    if header.get("format") != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field container")
    grid = HalfPlaneGrid(**header["grid"])
    data = np.frombuffer(raw, dtype="<f8").reshape(grid.shape + (2,))
    return header, grid, data[..., 0] + 1j * data[..., 1]


def write_modulus_csv(path, grid, u):
    """CSV ``rho,x3,abs_u`` in row-major order."""
    R, Z = grid.mesh
    arr = np.column_stack([R.ravel(), Z.ravel(), np.abs(np.asarray(u)).ravel()])
    np.savetxt(path, arr, delimiter=",", header="rho,x3,abs_u", comments="", fmt="%.10g")


def locate_peak(grid, u):
    """Argmax of ``|u|`` refined by a parabola through three nodes per direction.

    Returns ``(rho, x3, value)``.
    """
    m = np.abs(np.asarray(u))
    if not np.any(m > 0):
        raise ValueError("cannot locate the peak of a zero field")
    i, j = np.unravel_index(int(np.argmax(m)), m.shape)
    rho = float(grid.rho[i])
    x3 = float(grid.x3[j])
    val = float(m[i, j])
    if 0 < i < grid.n_rho - 1:
        fm, f0, fp = m[i - 1, j], m[i, j], m[i + 1, j]
        den = fm - 2 * f0 + fp
        if den < 0:
            off = 0.5 * (fm - fp) / den
            rho += off * grid.h_rho
            val -= 0.125 * (fm - fp) ** 2 / den
    if 0 < j < grid.n_x3 - 1:
        fm, f0, fp = m[i, j - 1], m[i, j], m[i, j + 1]
        den = fm - 2 * f0 + fp
        if den < 0:
            off = 0.5 * (fm - fp) / den
            x3 += off * grid.h_x3
            val -= 0.125 * (fm - fp) ** 2 / den
    return rho, x3, val
