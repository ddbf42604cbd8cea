"""Command line interface.

Exit codes: 0 success, 1 verification failure, 2 solver error,
3 precision collapse.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import analysis, driver, oracle
from .errors import (BilliardKAMError, ToleranceCollapse, VerificationFailed)
from .numerics import diophantine_scan, make_rotation, set_precision, to_mpfr

EXIT_OK, EXIT_VERIFY, EXIT_SOLVER, EXIT_COLLAPSE = 0, 1, 2, 3

DEFAULTS = {
    "theta": "golden",
    "precision_bits": 256,
    "max_degree": 67,
    "schedule": "doubling",
    "rho0": 0.05,
    "gamma": 0.9,
    "out_dir": "out",
    "seed_state": None,
    "steps": 5,
    "degree": 21,
    "count": 256,
    "k_max": 10000,
    "tau": 1.2,
    "c": 0.5,
    "collapse_factor": 1e3,
}

log = logging.getLogger("billiard_kam")


def _common() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's unset flags from hiding the same flag
    # given before the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON file with option values; flags override it")
    p.add_argument("--theta", help="rotation angle: decimal, 'pi' or 'golden' (default)")
    p.add_argument("--precision-bits", type=int)
    p.add_argument("--max-degree", type=int)
    p.add_argument("--schedule", choices=driver.SCHEDULES)
    p.add_argument("--rho0", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--out-dir")
    p.add_argument("--seed-state", help="directory written by 'compute'")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="billiard-kam", parents=[common],
                                     description="Formal invariant curves of convex billiards.")
    sub = parser.add_subparsers(dest="command", required=True)
    c = sub.add_parser("compute", parents=[common], help="run the iteration and dump the state")
    c.add_argument("--steps", type=int)
    o = sub.add_parser("oracle", parents=[common], help="direct solve, optionally compared to a state")
    o.add_argument("--degree", type=int)
    sub.add_parser("verify", parents=[common], help="structural checks on a dumped state")
    sub.add_parser("gevrey", parents=[common], help="coefficient growth fit of q")
    b = sub.add_parser("boundary", parents=[common], help="boundary points of the table")
    b.add_argument("--count", type=int)
    m = sub.add_parser("margin", parents=[common], help="Diophantine margin of theta")
    m.add_argument("--k-max", type=int)
    m.add_argument("--tau", type=float)
    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text())
        for k, v in cfg.items():
            opts[k.replace("-", "_")] = v
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command"):
            opts[k] = v
    return opts


def _rotation(opts: dict):
    return make_rotation(opts["theta"], c=opts["c"], tau=opts["tau"],
                         precision_bits=opts["precision_bits"], max_degree=opts["max_degree"])


def _params(opts: dict) -> driver.ScheduleParams:
    return driver.ScheduleParams(rho0=opts["rho0"], gamma=opts["gamma"],
                                 collapse_factor=opts["collapse_factor"])


def _load(opts: dict):
    if not opts.get("seed_state"):
        raise SystemExit("--seed-state is required for this command")
    return driver.load_state(opts["seed_state"])


def _claimed_order(state: driver.IterationState) -> int | None:
    if state.history:
        return state.history[-1].orders.get("residual")
    return None


def cmd_compute(opts: dict) -> int:
    if opts.get("seed_state"):
        state, rot = driver.load_state(opts["seed_state"])
    else:
        rot = _rotation(opts)
        state = None
    state = driver.run_schedule(rot, opts["steps"], opts["schedule"], opts["max_degree"],
                                _params(opts), seed=state)
    out = driver.dump_state(state, rot, opts["out_dir"])
    last = state.history[-1] if state.history else None
    print(json.dumps({"out_dir": str(out), "steps": state.n,
                      "residual_order": state.residual.order(),
                      "residual_norm": last.residual_norm if last else None}))
    return EXIT_OK


def cmd_oracle(opts: dict) -> int:
    rot = _rotation(opts) if not opts.get("seed_state") else None
    state = None
    if opts.get("seed_state"):
        state, rot = driver.load_state(opts["seed_state"])
    sol = oracle.solve_direct(rot, opts["degree"])
    out = Path(opts["out_dir"]) / "oracle"
    out.mkdir(parents=True, exist_ok=True)
    sol.q.dump_csv(out / "q.csv")
    sol.phi.dump_csv(out / "phi.csv")
    report = {"degree": opts["degree"],
              "residuals": {str(k): float(v) for k, v in sol.residuals.items()}}
    code = EXIT_OK
    if state is not None:
        through = min(opts["degree"], (_claimed_order(state) or state.max_degree) - 1)
        cmp = oracle.compare(sol, state.q, state.phi, through)
        report["comparison"] = {k: float(v) for k, v in cmp.items()}
        if cmp["q"] > 1e-20 or cmp["phi"] > 1e-20:
            code = EXIT_VERIFY
    print(json.dumps(report))
    return code


def cmd_verify(opts: dict) -> int:
    state, rot = _load(opts)
    report = analysis.verify_suite(state.q, state.phi, rot, _claimed_order(state))
    out = Path(opts["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(json.dumps(report, indent=2))
    print(json.dumps({"passed": report["passed"],
                      "failed": [c["name"] for c in report["checks"] if not c["passed"]]}))
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def _fit_summary(name: str, coeffs: dict, out: Path) -> dict:
    fit = analysis.gevrey_fit(coeffs)
    logC13, res13 = analysis.gevrey_bound(coeffs, 1.3)
    with open(out / f"gevrey_{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "log_abs_c", "fit"])
        w.writerows(fit.rows())
    return {"alpha": fit.alpha, "logC": fit.logC, "offset": fit.offset,
            "window": list(fit.window), "satisfied_alpha": fit.satisfied_alpha,
            "logC_at_alpha_1.3": logC13, "max_residual_at_alpha_1.3": max(res13)}


def cmd_gevrey(opts: dict) -> int:
    state, _ = _load(opts)
    order = _claimed_order(state) or state.max_degree
    out = Path(opts["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "q": _fit_summary("q", analysis.q_sequence(state.q, order - 1), out),
        "phi": _fit_summary("phi", analysis.phi_sequence(state.phi, order - 1), out),
        "conditions": [{"n": r.n, **{k: r.conditions[k] for k in "abcde"}} for r in state.history],
        "note": "alpha -> 5/4 is an asymptotic statement; a finite window only bounds the growth seen so far",
    }
    (out / "gevrey.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return EXIT_OK


def cmd_boundary(opts: dict) -> int:
    state, _ = _load(opts)
    pts = analysis.boundary_points(state.q, opts["count"])
    out = Path(opts["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "boundary_points.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["psi", "x", "y"])
        w.writerows(pts)
    print(json.dumps({"points": len(pts), "file": str(out / "boundary_points.csv")}))
    return EXIT_OK


def cmd_margin(opts: dict) -> int:
    set_precision(opts["precision_bits"])
    value, k = diophantine_scan(to_mpfr(opts["theta"]), opts["tau"], opts["k_max"])
    print(json.dumps({"margin": float(value), "argmin_k": k, "tau": opts["tau"],
                      "k_max": opts["k_max"]}))
    return EXIT_OK


COMMANDS = {"compute": cmd_compute, "oracle": cmd_oracle, "verify": cmd_verify,
            "gevrey": cmd_gevrey, "boundary": cmd_boundary, "margin": cmd_margin}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    opts = resolve_options(args)
    logging.basicConfig(level=logging.INFO if opts.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](opts)
    except ToleranceCollapse as exc:
        print(f"precision collapse: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except BilliardKAMError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
