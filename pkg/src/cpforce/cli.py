"""Command-line front end: ``cpforce run | check | presets``."""
from __future__ import annotations

import argparse
import json
import sys
import warnings

from . import dynamics as dyn
from .config import ENGINES, PRESETS, ConfigError, load_scenario, preset
from .scenario import build_models, default_out_dir, resolve_site, resolve_theta, run_scenario
from .statics import force_theta_static, potential_theta

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
INVARIANT_TOL = 1e-9


def _engines(text: str) -> list:
    names = [e.strip() for e in text.split(",") if e.strip()]
    bad = [e for e in names if e not in ENGINES]
    if bad or not names:
        raise ConfigError(f"--engines: unknown {bad or 'empty list'}; choose from {', '.join(ENGINES)}")
    return names


def cmd_run(args) -> int:
    scn = load_scenario(args.config)
    engines = _engines(args.engines) if args.engines else None
    out = args.out or default_out_dir()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        meta = run_scenario(scn, out, normalize=args.normalize, engines=engines)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for f in meta["files"]:
        print(f"{out}/{f['file']}")
    for c in meta["comparisons"]:
        print(f"compare theta[{c['theta_index']}] pos[{c['position_index']}]: "
              f"max|psi1| diff {c['max_abs_psi1_diff']:.3e}, max rel force diff {c['max_rel_force_diff']:.3e}")
    for f in meta["files"]:
        if "rate_fitted" in f:
            print(f"fitted rate {f['rate_fitted']:.6g} (expected {f['rate_expected']:.6g})")
    for fail in meta["failures"]:
        print(f"error: {fail['engine']} theta[{fail['theta_index']}] pos[{fail['position_index']}]: "
              f"{fail['error']}", file=sys.stderr)
    return EXIT_RUNTIME if meta["failures"] else EXIT_OK


def invariant_report(scn) -> tuple[list, list]:
    """(name, passed, detail) rows plus warning strings for a scenario."""
    rows, notes = [], []
    atom, mode = build_models(scn)
    for pi, z in enumerate(scn.position_list()):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            site = resolve_site(atom, mode, z)
        notes.extend(f"pos[{pi}]: {w.message}" for w in caught)
        tag = f"pos[{pi}]"
        rows.append((f"{tag} residual width non-negative", site.level.gamma_prime >= 0,
                     f"gamma_prime={site.level.gamma_prime:.6g}"))
        rows.append((f"{tag} Markov background", site.level.gamma_prime <= 0.1 * max(mode.omega_nu, 1e-300),
                     f"gamma_prime/omega_nu={site.level.gamma_prime / mode.omega_nu:.3g}"))
        if site.rabi <= 0:
            notes.append(f"{tag}: zero Rabi frequency, dynamics skipped")
            continue
        for ti, spec in enumerate(scn.thetas):
            theta = resolve_theta(spec, site)
            sol = dyn.solve(site.level, site.point, theta)
            t = f"{tag} theta[{ti}]"
            if sol.degenerate:
                notes.append(f"{t}: degenerate roots, confluent solution used")
            for name, val in sol.invariants().items():
                rows.append((f"{t} {name}", val < INVARIANT_TOL, f"{val:.3e}"))
            f_dyn = dyn.force_el_modal(sol, site.grad, 0.0)
            f_stat = force_theta_static(theta, site.point, site.grad)
            # the force is bounded by |grad|/2, so measure the error on that scale
            scale = max(0.5 * float(abs(site.grad).max()), 1e-300)
            err = float(abs(f_dyn - f_stat).max()) / scale
            rows.append((f"{t} initial force equals static force", err < INVARIANT_TOL, f"{err:.3e}"))
            u = potential_theta(theta, site.point)
            ok = abs(u) <= 0.5 * site.point.omega * (1 + 1e-12)
            rows.append((f"{t} potential within dressed band", ok, f"U={u:.6g}"))
    return rows, notes


def cmd_check(args) -> int:
    scn = load_scenario(args.config)
    rows, notes = invariant_report(scn)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    for n in notes:
        print(f"warning: {n}")
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_RUNTIME


def cmd_presets(args) -> int:
    if args.action == "list":
        for name in PRESETS:
            print(name)
        return EXIT_OK
    if not args.name:
        raise ConfigError("presets emit needs a preset NAME")
    print(json.dumps(preset(args.name), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpforce", description="Resonant Casimir-Polder forces on a two-level atom.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write CSV traces")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: $CPFORCE_OUT or ./cpforce_out)")
    r.add_argument("--normalize", choices=("Fplus", "none"))
    r.add_argument("--engines", help=f"comma-separated subset of {','.join(ENGINES)}")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("check", help="run the invariant suite without time evolution")
    c.add_argument("config")
    c.set_defaults(func=cmd_check)
    s = sub.add_parser("presets", help="list or emit builtin scenarios")
    s.add_argument("action", choices=("list", "emit"))
    s.add_argument("name", nargs="?")
    s.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
