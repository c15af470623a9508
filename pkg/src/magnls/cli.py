"""Command-line entry point: ``magnls <subcommand> --config FILE``.

Exit codes: 0 success, 2 configuration rejected, 3 solver non-convergence,
4 invariant-suite failure.
"""

import argparse
import csv
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .asymptotics import sweep
from .config import load_config
from .errors import ConfigError, ConvergenceError, SolverError
from .limit2d import (
    ConcentrationFunctionHandle,
    ground_energy_unit,
    minimize_M,
    solve_limit_ground_state,
)
from .potentials import check_lambda_conditions
from .reduced import save_field, write_modulus_csv
from .solver import solve
from .vortex import VortexConfig, reconstruct_uk, solve_vortex

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4
SUBCOMMANDS = ("limit", "map", "solve", "sweep", "vortex", "verify")

log = logging.getLogger("magnls")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Emitter:
    """Single writer for one run directory."""

    def __init__(self, out_dir, cfg, seed):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.meta = {"config_hash": cfg.config_hash, "version": __version__, "seed": seed}
        self.written = []

    def path(self, name):
        p = self.out / name
        self.written.append(str(p))
        return p

    def json(self, name, payload):
        doc = dict(payload)
        doc.update(self.meta)
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(doc), fh, sort_keys=True, indent=2)
            fh.write("\n")
        return doc

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def _eps_arg(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid eps list {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("eps values must be positive")
    return vals


def build_parser():
    ap = argparse.ArgumentParser(prog="magnls", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"magnls {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration (default: bundled example)")
        sp.add_argument("--eps", type=_eps_arg, help="comma-separated eps values")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="seed for randomized checks")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "vortex":
            sp.add_argument("--k", type=int, help="winding number")
        if name == "limit":
            sp.add_argument("--a0", type=float, default=1.0, help="limit coefficient")
    return ap


# --------------------------------------------------------------------------
# pipelines
# --------------------------------------------------------------------------

def run_limit(cfg, em, args):
    gs = solve_limit_ground_state(args.a0, cfg.p)
    em.csv("limit_profile.csv", ["r", "w"], zip(gs.r.tolist(), gs.w.tolist()))
    em.json("limit.json", {"a0": gs.a0, "p": gs.p, "energy": gs.energy, "mass": gs.mass,
                           "w0": gs.w0, "nehari_defect": gs.nehari_defect(),
                           "r_max": gs.r_max})
    print(f"E(0,{gs.a0:g}) = {gs.energy:.10g}  mass = {gs.mass:.10g}  w(0) = {gs.w0:.10g}")
    return EXIT_OK


def run_map(cfg, em, args):
    from .plotting import landscape_plot

    handle = ConcentrationFunctionHandle.from_potentials(cfg.magnetic, cfg.scalar, cfg.p)
    norm = ConcentrationFunctionHandle.from_potentials(cfg.magnetic, cfg.scalar, cfg.p,
                                                       normalization="normalized")
    res = minimize_M(norm, cfg.dom)
    conds = check_lambda_conditions(cfg.dom, norm, cfg.scalar)
    e01 = ground_energy_unit(cfg.p)
    scale = 2 * math.pi * e01
    dom = cfg.dom
    rho = np.linspace(dom.rho_lo, dom.rho_hi, 151)
    x3 = np.linspace(-dom.x3_half_width, dom.x3_half_width, 61)
    R, Z = np.meshgrid(rho, x3, indexing="ij")
    M = handle(R, Z)
    em.csv("landscape.csv", ["rho", "x3", "M"],
           zip(R.ravel().tolist(), Z.ravel().tolist(), M.ravel().tolist()))
    landscape_plot(em.path("landscape.svg"), rho, x3, M, res.rho_star)
    em.json("minimizer.json", {
        "rho_star": res.rho_star, "x3_star": res.x3_star,
        "M_min": scale * res.m_min, "M_min_normalized": res.m_min,
        "inf_closure": scale * res.inf_closure, "e01": e01,
        "domain_conditions": conds.as_dict(), "domain_conditions_passed": conds.passed,
    })
    print(f"rho* = {res.rho_star:.10f}  M_min = {scale * res.m_min:.8g}  "
          f"conditions {'hold' if conds.passed else 'FAIL'}")
    return EXIT_OK


def _emit_solution(em, cfg, res, eps, stem, ctx_extra=None):
    from .plotting import modulus_heatmap

    save_field(em.path(f"{stem}.bin"), cfg.grid, res.u, eps, cfg.p)
    write_modulus_csv(em.path(f"{stem}_abs.csv"), cfg.grid, res.u)
    modulus_heatmap(em.path(f"{stem}_abs.svg"), cfg.grid, res.u, title=f"|u|, eps={eps:g}",
                    dom=cfg.dom, peak=res.peak)
    payload = res.summary()
    if ctx_extra:
        payload.update(ctx_extra)
    return em.json(f"{stem}.json", payload)


def run_solve(cfg, em, args):
    eps = (args.eps or [cfg.eps_list[-1]])[-1]
    res = solve(cfg.context(eps), cfg.solver)
    _emit_solution(em, cfg, res, eps, f"solve_eps{eps:g}")
    print(f"eps={eps:g}  c_eps/eps^2={res.c_eps / eps**2:.8g}  peak=({res.peak[0]:.6f}, "
          f"{res.peak[1]:.2e})  residual={res.residual:.2e}  iterations={res.iterations}")
    return EXIT_OK


def _slice_at_zero(grid, u):
    m = np.abs(u)
    return np.array([np.interp(0.0, grid.x3, row) for row in m])


def run_sweep(cfg, em, args):
    from .plotting import modulus_heatmap

    eps_list = args.eps or list(cfg.eps_list)
    rep = sweep(cfg.context(eps_list[0]), eps_list, cfg.solver, keep_fields=True)
    for eps, u in rep.fields.items():
        em.csv(f"slice_eps{eps:g}.csv", ["rho", "abs_u"],
               zip(cfg.grid.rho.tolist(), _slice_at_zero(cfg.grid, u).tolist()))
        rec = next(r for r in rep.records if r.eps == eps)
        modulus_heatmap(em.path(f"heatmap_eps{eps:g}.svg"), cfg.grid, u,
                        title=f"|u|, eps={eps:g}", dom=cfg.dom,
                        peak=(rec.peak_rho, rec.peak_x3))
    em.json("sweep.json", rep.as_dict())
    width = 10
    print("eps".ljust(6), "c/eps^2".ljust(width), "rho_peak".ljust(width),
          "prof_err".ljust(width), "viol")
    for r in rep.records:
        print(f"{r.eps:<6g} {r.c_eps_over_eps2:<{width}.6g} {r.peak_rho:<{width}.6f} "
              f"{r.profile_error:<{width}.3g} {r.penalization_violations}"
              + (f"  FAILED: {r.failure}" if r.failure else ""))
    if any(r.failure for r in rep.records):
        return EXIT_SOLVER
    return EXIT_OK


def run_vortex(cfg, em, args):
    eps = (args.eps or [cfg.eps_list[-1]])[-1]
    k = args.k if args.k is not None else int(cfg.vortex.get("k", 0))
    C_k = float(cfg.vortex.get("C_k", 1.0))
    vcfg = VortexConfig(k, cfg.magnetic, cfg.scalar, cfg.p, C_k)
    res = solve_vortex(vcfg, eps, cfg.grid, cfg.pen, cfg.dom, cfg.solver)
    rows = []
    for n in (8, 16, 32, 64):
        rr = reconstruct_uk(vcfg, eps, cfg.grid, res.u, cfg.pen, cfg.dom, n)
        rows.append((n, rr.max_diff, rr.rel_diff, rr.modulus_error))
    em.csv(f"vortex_k{k}_eps{eps:g}_theta_residual.csv",
           ["theta_samples", "max_diff", "rel_diff", "modulus_error"], rows)
    _emit_solution(em, cfg, res, eps, f"vortex_k{k}_eps{eps:g}", {"k": k, "C_k": C_k})
    print(f"k={k} eps={eps:g}  peak=({res.peak[0]:.6f}, {res.peak[1]:.2e})  "
          f"peak|v|={res.peak_value:.6g}  reconstruction rel. diff at 64 angles={rows[-1][2]:.2e}")
    return EXIT_OK


def run_verify(cfg, em, args):
    from .verify import all_passed, check_table, run_suite

    seed = args.seed if args.seed is not None else cfg.seed
    checks = run_suite(cfg, seed)
    em.json("verify.json", {"checks": [c.as_dict() for c in checks],
                            "passed": all_passed(checks)})
    print(check_table(checks))
    return EXIT_OK if all_passed(checks) else EXIT_INVARIANT


PIPELINES = {"limit": run_limit, "map": run_map, "solve": run_solve, "sweep": run_sweep,
             "vortex": run_vortex, "verify": run_verify}


def dispatch(subcommand, cfg, args):
    """Run one pipeline; returns the process exit status."""
    if subcommand not in PIPELINES:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    seed = args.seed if args.seed is not None else cfg.seed
    em = Emitter(args.out or cfg.output_dir, cfg, seed)
    return PIPELINES[subcommand](cfg, em, args)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print("configuration rejected:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return dispatch(args.command, cfg, args)
    except ConfigError as exc:
        print(f"configuration rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
