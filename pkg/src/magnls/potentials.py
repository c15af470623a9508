"""Potential families, the concentration domain and cylindrical geometry.

Everything in this module is expressed in the reduced coordinates
``(rho, x3)`` of a cylindrically symmetric configuration, with ``rho > 0``
the distance to the symmetry axis.  Points of R^3 are passed as arrays whose
last axis has length 3.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._numerics import golden_section_min, scan_then_golden
from .errors import DomainError

MAGNETIC_FAMILIES = ("constant-field", "tangential-power", "custom-tabulated")
SCALAR_FAMILIES = (
    "constant",
    "cylindrical-hardy",
    "radial-power",
    "compact-bump",
    "zero-minimum-well",
    "tabulated",
)


# --------------------------------------------------------------------------
# tabulated data
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Table2D:
    """Values sampled on a tensor grid in ``(rho, x3)``, bilinear in between."""

    rho: np.ndarray
    x3: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        x3 = np.asarray(self.x3, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (rho.size, x3.size):
            raise ValueError(
                f"table shape {values.shape} does not match axes ({rho.size}, {x3.size})"
            )
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "x3", x3)
        object.__setattr__(self, "values", values)
        interp = RegularGridInterpolator((rho, x3), values, method="linear")
        object.__setattr__(self, "_interp", interp)

    def __call__(self, rho, x3):
        rho, x3 = np.broadcast_arrays(np.asarray(rho, float), np.asarray(x3, float))
        pts = np.stack([rho.ravel(), x3.ravel()], axis=-1)
        try:
            out = self._interp(pts)
        except ValueError as exc:
            raise DomainError(f"point outside tabulated range: {exc}") from None
        return out.reshape(rho.shape)

    @classmethod
    def from_csv(cls, path):
        """Read a ``rho,x3,value`` CSV stored in row-major order (x3 fastest)."""
        data = np.genfromtxt(path, delimiter=",", names=True)
        missing = {"rho", "x3", "value"} - set(data.dtype.names or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        rho = np.unique(data["rho"])
        x3 = np.unique(data["x3"])
        if data.size != rho.size * x3.size:
            raise ValueError(f"{path}: rows do not form a full tensor grid")
        values = np.asarray(data["value"], float).reshape(rho.size, x3.size)
        expect_rho = np.repeat(rho, x3.size)
        expect_x3 = np.tile(x3, rho.size)
        if not (np.allclose(data["rho"], expect_rho) and np.allclose(data["x3"], expect_x3)):
            raise ValueError(f"{path}: rows are not in row-major (rho, x3) order")
        return cls(rho, x3, values)

    def to_csv(self, path):
        rr, zz = np.meshgrid(self.rho, self.x3, indexing="ij")
        arr = np.column_stack([rr.ravel(), zz.ravel(), self.values.ravel()])
        np.savetxt(path, arr, delimiter=",", header="rho,x3,value", comments="", fmt="%.17g")


def _zero(rho, x3):
    return np.zeros(np.broadcast(np.asarray(rho), np.asarray(x3)).shape)


# --------------------------------------------------------------------------
# magnetic potential
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CylMagneticPotential:
    """Equivariant vector potential ``A = phi e_n + c e_tau + a3 e_3``.

    ``phi`` and ``c`` are evaluated through ``|x3|``; ``a3`` receives the signed
    height and is expected to be odd in it.  For the tabulated family,
    ``tables`` maps component names (``"phi"``, ``"c"``, ``"a3"``) to
    :class:`Table2D` objects; missing components are zero.  ``phi`` and ``c``
    tables are indexed by ``|x3|``, the ``a3`` table by the signed height.
    """

    family: str = "constant-field"
    params: tuple = (1.0,)
    tables: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in MAGNETIC_FAMILIES:
            raise ValueError(f"unknown magnetic family {self.family!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.family == "constant-field" and len(self.params) != 1:
            raise ValueError("constant-field expects params (b,)")
        if self.family == "tangential-power" and len(self.params) != 2:
            raise ValueError("tangential-power expects params (b, q)")
        if self.family == "custom-tabulated":
            unknown = set(self.tables) - {"phi", "c", "a3"}
            if unknown:
                raise ValueError(f"unknown tabulated components {sorted(unknown)}")

    @classmethod
    def constant_field(cls, b):
        return cls("constant-field", (b,))

    @classmethod
    def zero(cls):
        return cls("constant-field", (0.0,))

    def phi(self, rho, x3):
        if self.family == "custom-tabulated" and "phi" in self.tables:
            return self.tables["phi"](rho, np.abs(x3))
        return _zero(rho, x3)

    def c(self, rho, x3):
        rho = np.asarray(rho, dtype=float)
        if self.family == "constant-field":
            return self.params[0] * rho / 2.0 + 0.0 * np.asarray(x3, float)
        if self.family == "tangential-power":
            b, q = self.params
            return b * rho**q + 0.0 * np.asarray(x3, float)
        if "c" in self.tables:
            return self.tables["c"](rho, np.abs(x3))
        return _zero(rho, x3)

    def a3(self, rho, x3):
        if self.family == "custom-tabulated" and "a3" in self.tables:
            return self.tables["a3"](rho, x3)
        return _zero(rho, x3)

    @property
    def is_planar_free(self):
        """True when ``phi`` and ``a3`` vanish identically (no phase coupling)."""
        return self.family != "custom-tabulated" or not ({"phi", "a3"} & set(self.tables))

    def c_depends_on_x3(self, rho_samples=None):
        """Whether the tangential component varies with the height."""
        if self.family != "custom-tabulated" or "c" not in self.tables:
            return False
        vals = self.tables["c"].values
        return bool(np.ptp(vals, axis=1).max() > 0.0)


def eval_A(pot, x):
    """Cartesian vector potential at the point(s) ``x``.

    Raises
    ------
    DomainError
        If a point lies on the symmetry axis, where the frame is undefined.
    """
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[..., 0], x[..., 1])
    if np.any(rho == 0.0):
        raise DomainError("vector potential frame undefined on the symmetry axis")
    cos_t = x[..., 0] / rho
    sin_t = x[..., 1] / rho
    phi = pot.phi(rho, x[..., 2])
    c = pot.c(rho, x[..., 2])
    a3 = pot.a3(rho, x[..., 2])
    return np.stack([phi * cos_t - c * sin_t, phi * sin_t + c * cos_t, a3], axis=-1)


@dataclass(frozen=True)
class EquivarianceReport:
    max_violation: float
    tol: float
    n_samples: int

    @property
    def passed(self):
        return self.max_violation <= self.tol


def check_equivariance(pot, sample_count=100, *, seed=0, tol=1e-12,
                       rho_range=(0.2, 3.0), x3_range=(-2.0, 2.0)):
    """Worst ``|g A(g^-1 x) - A(x)|`` over random rotations/reflections."""
    rng = np.random.default_rng(seed)
    rho = rng.uniform(*rho_range, sample_count)
    theta = rng.uniform(0.0, 2 * np.pi, sample_count)
    x3 = rng.uniform(*x3_range, sample_count)
    x = np.stack([rho * np.cos(theta), rho * np.sin(theta), x3], axis=-1)
    alpha = rng.uniform(0.0, 2 * np.pi, sample_count)
    sign = rng.choice([-1.0, 1.0], sample_count)
    ca, sa = np.cos(alpha), np.sin(alpha)
    g = np.zeros((sample_count, 3, 3))
    g[:, 0, 0], g[:, 0, 1] = ca, -sa
    g[:, 1, 0], g[:, 1, 1] = sa, ca
    g[:, 2, 2] = sign
    ginv_x = np.einsum("nji,nj->ni", g, x)  # g is orthogonal
    lhs = np.einsum("nij,nj->ni", g, eval_A(pot, ginv_x))
    viol = np.linalg.norm(lhs - eval_A(pot, x), axis=-1)
    scale = max(1.0, float(np.abs(eval_A(pot, x)).max()))
    return EquivarianceReport(float(viol.max()), tol * scale, sample_count)


# --------------------------------------------------------------------------
# scalar potential
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarPotential:
    """Nonnegative potential depending on ``rho`` and ``|x3|``.

    Parameters by family:

    ``constant``            ``(V0,)``
    ``cylindrical-hardy``   ``(k, alpha)``: ``k / rho**alpha``
    ``radial-power``        ``(k, alpha)``: ``k / |x|**alpha``
    ``compact-bump``        ``(amp, rho_c, radius)``: ``amp (1 - d^2/r^2)^2`` inside the
                            cylindrical ball of radius ``r`` around ``(rho_c, 0)``
    ``zero-minimum-well``   ``(rho_v, scale)``: ``scale ((rho - rho_v)^2 + x3^2)``
    ``tabulated``           table indexed by ``(rho, |x3|)``
    """

    family: str = "constant"
    params: tuple = (1.0,)
    alpha_inf: float = None
    alpha_zero: float = None
    table: Table2D = None

    def __post_init__(self):
        if self.family not in SCALAR_FAMILIES:
            raise ValueError(f"unknown scalar family {self.family!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        nparams = {"constant": 1, "cylindrical-hardy": 2, "radial-power": 2,
                   "compact-bump": 3, "zero-minimum-well": 2, "tabulated": 0}[self.family]
        if len(self.params) != nparams:
            raise ValueError(f"{self.family} expects {nparams} params, got {len(self.params)}")
        if self.family != "tabulated" and self.params and self.params[0] < 0:
            raise ValueError("potential amplitude must be nonnegative")
        if self.family == "zero-minimum-well" and self.params[1] < 0:
            raise ValueError("well scale must be nonnegative")
        if self.family == "tabulated":
            if self.table is None:
                raise ValueError("tabulated potential needs a table")
            if np.any(self.table.values < 0):
                raise ValueError("tabulated potential has negative entries")

    def __call__(self, rho, x3):
        rho = np.asarray(rho, dtype=float)
        z = np.abs(np.asarray(x3, dtype=float))
        rho, z = np.broadcast_arrays(rho, z)
        fam, p = self.family, self.params
        if fam == "constant":
            return np.full(rho.shape, p[0])
        if fam == "cylindrical-hardy":
            if np.any(rho <= 0):
                raise DomainError("cylindrical Hardy potential is singular on the axis")
            return p[0] / rho ** p[1]
        if fam == "radial-power":
            r = np.hypot(rho, z)
            if np.any(r <= 0):
                raise DomainError("radial power potential is singular at the origin")
            return p[0] / r ** p[1]
        if fam == "compact-bump":
            amp, rc, rad = p
            q = ((rho - rc) ** 2 + z**2) / rad**2
            return amp * np.where(q < 1.0, (1.0 - q) ** 2, 0.0)
        if fam == "zero-minimum-well":
            rv, scale = p
            return scale * ((rho - rv) ** 2 + z**2)
        return self.table(rho, z)


# --------------------------------------------------------------------------
# concentration domain and penalization parameters
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcentrationDomain:
    """Solid torus ``rho_lo < rho < rho_hi``, ``|x3| < x3_half_width``."""

    rho_lo: float
    rho_hi: float
    x3_half_width: float

    def __post_init__(self):
        if not (0.0 < self.rho_lo < self.rho_hi):
            raise ValueError("need 0 < rho_lo < rho_hi (closure must avoid the axis)")
        if not self.x3_half_width > 0.0:
            raise ValueError("x3_half_width must be positive")

    def contains(self, rho, x3):
        rho = np.asarray(rho)
        x3 = np.asarray(x3)
        return (rho > self.rho_lo) & (rho < self.rho_hi) & (np.abs(x3) < self.x3_half_width)

    def distance_to_boundary(self, rho, x3):
        """Cylindrical distance from an interior point to the boundary."""
        rho = np.asarray(rho, float)
        x3 = np.asarray(x3, float)
        return np.minimum.reduce([rho - self.rho_lo, self.rho_hi - rho,
                                  self.x3_half_width - np.abs(x3)])


@dataclass(frozen=True)
class PenalizationParams:
    mu: float = 0.5
    kappa: float = 0.2
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if not 0.0 < self.kappa < 0.25:
            raise ValueError(f"kappa must lie in (0, 1/4), got {self.kappa}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")


def hardy_H_radius(params, r):
    """Auxiliary Hardy-type potential as a function of ``|x|``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("auxiliary Hardy potential is undefined at the origin")
    return params.kappa / (r**2 * (np.log(r) ** 2 + 1.0) ** ((1.0 + params.beta) / 2.0))


def aux_hardy_H(params, x):
    """``kappa / (|x|^2 ((log|x|)^2 + 1)^((1+beta)/2))`` at point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    return hardy_H_radius(params, np.linalg.norm(x, axis=-1))


def d_cyl(y, z):
    """Distance between the circles about the x3-axis through ``y`` and ``z``."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    ry = np.hypot(y[..., 0], y[..., 1])
    rz = np.hypot(z[..., 0], z[..., 1])
    return np.hypot(ry - rz, y[..., 2] - z[..., 2])


# --------------------------------------------------------------------------
# conditions on the concentration domain
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaReport:
    inf_segment: float
    argmin_segment: float
    inf_segment_boundary: float
    inf_domain: float
    inf_V: float
    tol: float

    @property
    def interior_minimum(self):
        return self.inf_segment < self.inf_segment_boundary - self.tol

    @property
    def below_twice_infimum(self):
        return self.inf_segment < 2.0 * self.inf_domain - self.tol

    @property
    def potential_positive(self):
        return self.inf_V > self.tol

    @property
    def passed(self):
        return self.interior_minimum and self.below_twice_infimum and self.potential_positive

    def as_dict(self):
        return {
            "inf_segment": self.inf_segment,
            "argmin_segment": self.argmin_segment,
            "inf_segment_boundary": self.inf_segment_boundary,
            "inf_domain": self.inf_domain,
            "inf_V": self.inf_V,
            "interior_minimum": self.interior_minimum,
            "below_twice_infimum": self.below_twice_infimum,
            "potential_positive": self.potential_positive,
            "tol": self.tol,
        }


def _checked(f, rho, x3):
    vals = np.asarray(f(rho, x3), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DomainError("function is not finite somewhere on the closed domain")
    return vals


def _min_over_rectangle(f, dom, n):
    """Minimum of ``f(rho, x3)`` on the closed rectangle: edges, interior, refine."""
    h = dom.x3_half_width
    rs = np.linspace(dom.rho_lo, dom.rho_hi, n)
    zs = np.linspace(-h, h, n)
    best = np.inf
    best_pt = None
    for rr, zz in ((rs, np.full(n, -h)), (rs, np.full(n, h)),
                   (np.full(n, dom.rho_lo), zs), (np.full(n, dom.rho_hi), zs)):
        v = _checked(f, rr, zz)
        k = int(np.argmin(v))
        if v[k] < best:
            best, best_pt = float(v[k]), (rr[k], zz[k])
    m = max(64, n // 8)
    R, Z = np.meshgrid(np.linspace(dom.rho_lo, dom.rho_hi, m),
                       np.linspace(-h, h, m), indexing="ij")
    v = _checked(f, R, Z)
    k = np.unravel_index(int(np.argmin(v)), v.shape)
    if v[k] < best:
        best, best_pt = float(v[k]), (R[k], Z[k])
    # coordinate-wise golden refinement inside the best cell
    r0, z0 = best_pt
    dr = (dom.rho_hi - dom.rho_lo) / (m - 1)
    dz = 2 * h / (m - 1)
    for _ in range(3):
        r0, _ = golden_section_min(lambda t: float(f(np.array([t]), np.array([z0]))[0]),
                                   max(dom.rho_lo, r0 - dr), min(dom.rho_hi, r0 + dr))
        z0, val = golden_section_min(lambda t: float(f(np.array([r0]), np.array([t]))[0]),
                                     max(-h, z0 - dz), min(h, z0 + dz))
        best = min(best, val)
    return best


def check_lambda_conditions(dom, mfun, V, n=2048, tol=1e-12):
    """Evaluate the three admissibility conditions on the concentration domain.

    Parameters
    ----------
    dom : ConcentrationDomain
    mfun : callable
        Concentration function ``mfun(rho, x3)``, vectorized.
    V : callable
        Scalar potential ``V(rho, x3)``, vectorized.
    n : int
        Samples per edge of the rectangle.
    """
    seg = lambda r: _checked(mfun, r, np.zeros_like(r))  # noqa: E731
    rho_star, m_star = scan_then_golden(seg, dom.rho_lo, dom.rho_hi, n=n, tol=1e-13)
    m_bdry = float(min(seg(np.array([dom.rho_lo]))[0], seg(np.array([dom.rho_hi]))[0]))
    inf_dom = _min_over_rectangle(mfun, dom, n)
    inf_V = _min_over_rectangle(V, dom, n)
    scale = max(1.0, abs(m_star))
    return LambdaReport(
        inf_segment=float(m_star),
        argmin_segment=float(rho_star),
        inf_segment_boundary=m_bdry,
        inf_domain=float(min(inf_dom, m_star)),
        inf_V=float(inf_V),
        tol=tol * scale,
    )


def cylindrical_ball_inside(dom, center, radius):
    """Whether ``B_cyl(center, radius)`` lies inside the domain."""
    rho_c, x3_c = center
    return bool(
        rho_c - radius >= dom.rho_lo
        and rho_c + radius <= dom.rho_hi
        and abs(x3_c) + radius <= dom.x3_half_width
        and math.isfinite(radius)
        and radius > 0
    )
