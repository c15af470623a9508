"""Run configuration: JSON ingestion and cross-validation."""

from dataclasses import dataclass, field
import hashlib
import json
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .potentials import (
    MAGNETIC_FAMILIES,
    SCALAR_FAMILIES,
    ConcentrationDomain,
    CylMagneticPotential,
    PenalizationParams,
    ScalarPotential,
    Table2D,
)
from .reduced import HalfPlaneGrid, ReducedContext
from .solver import SolveConfig

DEFAULT_CONFIG = "example.json"


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    config_hash: str
    p: float
    magnetic: CylMagneticPotential
    scalar: ScalarPotential
    dom: ConcentrationDomain
    grid: HalfPlaneGrid
    pen: PenalizationParams
    eps_list: tuple
    solver: SolveConfig
    output_dir: str = "magnls-out"
    seed: int = 0
    vortex: dict = field(default_factory=dict)

    def context(self, eps):
        return ReducedContext(eps, self.grid, self.magnetic, self.scalar, self.pen, self.dom,
                              self.p)


def canonical_hash(doc):
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def default_config_path():
    return resources.files("magnls") / "data" / DEFAULT_CONFIG


def _load_table(ref, base):
    path = Path(ref)
    if not path.is_absolute():
        path = base / path
    return Table2D.from_csv(path)


def _build_magnetic(d, base, errs):
    fam = d.get("family", "constant-field")
    if fam not in MAGNETIC_FAMILIES:
        errs.append(f"magnetic.family {fam!r} not in {MAGNETIC_FAMILIES}")
        return None
    try:
        tables = {k: _load_table(v, base) for k, v in d.get("tables", {}).items()}
        return CylMagneticPotential(fam, tuple(d.get("params", ())), tables)
    except (ValueError, OSError) as exc:
        errs.append(f"magnetic: {exc}")
        return None


def _build_scalar(d, base, errs):
    fam = d.get("family")
    if fam not in SCALAR_FAMILIES:
        errs.append(f"scalar.family {fam!r} not in {SCALAR_FAMILIES}")
        return None
    try:
        table = _load_table(d["table"], base) if fam == "tabulated" else None
        return ScalarPotential(fam, tuple(d.get("params", ())), d.get("alpha_inf"),
                               d.get("alpha_zero"), table)
    except (ValueError, OSError, KeyError) as exc:
        errs.append(f"scalar: {exc}")
        return None


def validate(doc, base=Path(".")):
    """Build a :class:`RunConfig` or raise :class:`ConfigError` listing every violation."""
    errs = []
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    p = doc.get("p")
    if not isinstance(p, (int, float)) or not p > 2:
        errs.append(f"exponent p must satisfy p > 2 (got {p!r})")
        p = None

    magnetic = _build_magnetic(doc.get("magnetic", {}), base, errs)
    scalar = _build_scalar(doc.get("scalar", {}), base, errs)

    pen_d = doc.get("penalization", {})
    mu = pen_d.get("mu", 0.5)
    kappa = pen_d.get("kappa", 0.2)
    beta = pen_d.get("beta", 1.0)
    if not 0 < mu < 1:
        errs.append(f"penalization mu must lie in (0, 1) (got {mu})")
    if not 0 < kappa < 0.25:
        errs.append(f"Hardy constant kappa must lie in (0, 1/4) (got {kappa})")
    if not beta > 0:
        errs.append(f"Hardy exponent beta must be positive (got {beta})")
    pen = PenalizationParams(mu, kappa, beta) if (
        0 < mu < 1 and 0 < kappa < 0.25 and beta > 0) else None

    dom = None
    try:
        dom = ConcentrationDomain(**doc["domain"])
    except (KeyError, TypeError, ValueError) as exc:
        errs.append(f"domain: {exc}")

    grid = None
    try:
        grid = HalfPlaneGrid(**doc.get("grid", {}))
    except (TypeError, ValueError) as exc:
        errs.append(f"grid: {exc}")
    if grid is not None and dom is not None and not grid.contains_with_margin(dom, 0.1):
        errs.append("domain closure must sit inside the grid with a margin of at least "
                    "10% of each extent")

    if scalar is not None and p is not None:
        a_inf = scalar.alpha_inf
        if 2 < p <= 4 and (a_inf is None or a_inf > 2):
            errs.append("for 2 < p <= 4 the scalar potential must declare a decay exponent "
                        f"alpha_inf <= 2 (liminf V |x|^alpha > 0 at infinity); got {a_inf!r}")
        if scalar.alpha_zero is not None and scalar.alpha_zero < 2:
            errs.append(f"alpha_zero must be at least 2 (got {scalar.alpha_zero})")

    eps = doc.get("eps", [0.4, 0.2, 0.1])
    if isinstance(eps, (int, float)):
        eps = [eps]
    if not eps or any(not isinstance(e, (int, float)) or e <= 0 for e in eps):
        errs.append(f"eps values must be positive numbers (got {eps!r})")
    elif any(b >= a for a, b in zip(eps, eps[1:])):
        errs.append("eps list must be strictly decreasing")

    solver = None
    try:
        solver = SolveConfig(**doc.get("solver", {}))
    except (TypeError, ValueError) as exc:
        errs.append(f"solver: {exc}")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        errs.append(f"seed must be an unsigned 64-bit integer (got {seed!r})")

    if errs:
        raise ConfigError(errs)
    return RunConfig(
        raw=doc, config_hash=canonical_hash(doc), p=float(p), magnetic=magnetic,
        scalar=scalar, dom=dom, grid=grid, pen=pen, eps_list=tuple(float(e) for e in eps),
        solver=solver, output_dir=doc.get("output_dir", "magnls-out"), seed=seed,
        vortex=dict(doc.get("vortex", {})),
    )


def load_config(path=None):
    """Read and validate a JSON configuration file (the bundled example by default)."""
    if path is None:
        src = default_config_path()
        text = src.read_text(encoding="utf-8")
        base = Path(".")
    else:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        base = path.parent
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    return validate(doc, base)
