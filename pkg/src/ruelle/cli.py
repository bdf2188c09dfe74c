"""Command-line front end.

Commands: ``toric``, ``estimate-flow``, ``counterexample``, ``check <name>``,
``orbits``.  Regions are passed as inline JSON or a path to a JSON file,
e.g. ``{"n": 2, "kind": "ellipsoid", "widths": [1, 2]}``.  Reports are
deterministic for fixed config and seed; wall time goes to stderr.  Exit
codes: 1 input error, 2 computation error, 3 check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import _report, convexity, flows, toric
from ._quadrature import QuadratureSpec
from .errors import ComputationError, InputError, NonIntegrableHessian, SpecParseError


def load_region(spec):
    text = spec
    if not spec.lstrip().startswith("{"):
        if not os.path.exists(spec):
            raise SpecParseError(f"region spec file not found: {spec}")
        with open(spec) as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"region spec is not valid JSON: {exc}") from exc
    return toric.region_from_json(obj)


def _quad(tol):
    return QuadratureSpec(rel_tol=tol) if tol else None


def cmd_toric(args):
    region = load_region(args.region)
    quad = _quad(args.tol)
    quantities = {}
    ru, ru_err = toric.ruelle_invariant_toric(region, quad, return_error=True)
    quantities["ru"] = _report.quantity(ru, "quadrature", ru_err)
    vol, vol_err = toric.volume_toric(region, quad, return_error=True)
    if isinstance(region, toric.Ellipsoid):
        quantities["vol"] = _report.quantity(vol, "closed-form")
    else:
        quantities["vol"] = _report.quantity(vol, "quadrature", vol_err)
    try:
        S, S_err = toric.laplacian_functional(region, quad, return_error=True)
        quantities["laplacian"] = _report.quantity(S, "quadrature", S_err)
    except NonIntegrableHessian:
        quantities["laplacian"] = _report.quantity(
            None, "skipped (Hessian guard for p < 1/2)"
        )
    mono = toric.is_strictly_monotone(region)
    checks = [{"name": "strictly-monotone", "passed": bool(mono.monotone)}]
    if toric.is_concave_sampled(region):
        sy = toric.systole_concave(region)
        quantities["systole"] = _report.quantity(sy.value, "bracket-enumeration")
        quantities["systole_vector"] = _report.quantity(
            sy.vector, "bracket-enumeration"
        )
    elif isinstance(region, toric.Ellipsoid) or (
        isinstance(region, toric.PFamily) and region.p >= 1
    ):
        quantities["systole"] = _report.quantity(
            convexity.convex_toric_systole(region), "closed-form"
        )
    return _report.make_report("toric", _config(args), quantities, checks), all(
        c["passed"] for c in checks
    )


def cmd_estimate_flow(args):
    region = load_region(args.region)
    field = flows.toric_field(region)
    est = flows.ruelle_estimate(
        field, T=args.T, samples=args.samples, seed=args.seed, dt=args.dt
    )
    quantities = {
        "accepted": _report.quantity(est.n_accepted, "monte-carlo"),
        "failed": _report.quantity(est.n_failed, "monte-carlo"),
    }
    checks = []
    if args.T > 0:
        quantities["estimate"] = _report.quantity(
            est.estimate, "monte-carlo", est.stderr
        )
        for t, v, e in est.checkpoints:
            quantities[f"estimate_T={t:g}"] = _report.quantity(v, "monte-carlo", e)
        ru, ru_err = toric.ruelle_invariant_toric(region, return_error=True)
        quantities["toric_quadrature"] = _report.quantity(ru, "quadrature", ru_err)
        checks.append(
            {
                "name": "matches-toric-quadrature",
                "passed": bool(abs(est.estimate - ru) <= 3 * est.stderr + ru_err),
                "deviation": abs(est.estimate - ru),
                "budget": 3 * est.stderr + ru_err,
            }
        )
    if args.dump:
        _dump_trajectory(field, args, est)
    return _report.make_report("estimate-flow", _config(args), quantities, checks), all(
        c["passed"] for c in checks
    )


def _dump_trajectory(field, args, est):
    pts, accept, _ = flows._propose(field, args.samples, args.seed)
    idx = np.flatnonzero(accept)
    if not len(idx) or args.T <= 0:
        return
    x0 = pts[idx[0]]
    tr = flows.integrate_cocycle(field, x0, T=args.T, dt=args.dt, store_every=16)
    lines = [
        "t," + ",".join(f"z{k}" for k in range(2 * field.n)) + ",u"
    ]
    for t, z, u in zip(tr.times, tr.points, tr.lift):
        lines.append(f"{t!r}," + ",".join(repr(v) for v in z) + f",{u!r}")
    _report.write_output("\n".join(lines) + "\n", args.dump)


def cmd_counterexample(args):
    base = load_region(args.region)
    spec = convexity.build_counterexample(
        base, C_target=args.c_target, epsilon=args.epsilon, collar=args.collar
    )
    quantities = {
        "A": _report.quantity(spec.A, "bisection"),
        "B": _report.quantity(spec.B, "containment-grid"),
    }
    checks = [
        {"name": name, **entry} for name, entry in sorted(spec.checks.items())
    ]
    extra = {"counterexample": spec.to_json()}
    return (
        _report.make_report("counterexample", _config(args), quantities, checks, extra),
        spec.passed,
    )


def _check_main_inequality(args):
    region = load_region(args.region)
    rep = convexity.check_main_inequality(region, _quad(args.tol))
    quantities = {
        "ru": _report.quantity(rep.ru, "quadrature"),
        "systole": _report.quantity(rep.c, "closed-form"),
        "vol": _report.quantity(rep.vol, "quadrature"),
        "log_constant": _report.quantity(rep.log_constant, "closed-form"),
        "log_margin": _report.quantity(rep.margin, "log-space"),
    }
    checks = [
        {
            "name": "main-inequality",
            "passed": rep.verdict == "SATISFIED",
            "verdict": rep.verdict,
            "log_margin": rep.margin,
        }
    ]
    return quantities, checks


def _check_sandwich(args):
    if not args.region2:
        raise SpecParseError("sandwich check needs --region2 for the outer region")
    inner = load_region(args.region)
    outer = load_region(args.region2)
    rep = convexity.sandwich_check(inner, outer, L=args.L, quadrature=_quad(args.tol))
    quantities = {
        "L": _report.quantity(rep.L, "grid-ratio"),
        "S_inner": _report.quantity(rep.S_inner, "quadrature"),
        "S_outer": _report.quantity(rep.S_outer, "quadrature"),
        "bound": _report.quantity(rep.bound, "closed-form"),
    }
    checks = [{"name": "sandwich", "passed": rep.passed}]
    return quantities, checks


def _check_trace_bound(args):
    region = load_region(args.region)
    rep = flows.trace_bound_check(
        flows.toric_field(region), samples=args.samples, T=args.T, seed=args.seed
    )
    quantities = {
        "lhs": _report.quantity(rep.lhs, "monte-carlo", rep.lhs_stderr),
        "rhs": _report.quantity(rep.rhs, "quadrature", rep.rhs_err),
    }
    checks = [{"name": "trace-bound", "passed": rep.passed}]
    return quantities, checks


def _check_dyn_convexity(args):
    region = load_region(args.region)
    records = toric.enumerate_orbits(region, T_max=args.T_max, grid=args.grid)
    n = region.n
    worst = None
    for rec in records:
        res = toric.lcz_toric_orbit(rec, region)
        if worst is None or res.value < worst:
            worst = res.value
    quantities = {
        "orbits": _report.quantity(len(records), "enumeration"),
        "min_index_hamiltonian": _report.quantity(worst, "certified-bound"),
    }
    checks = [
        {
            "name": "dyn-convexity",
            "passed": bool(worst is None or worst >= n),
            "threshold": n,
        }
    ]
    return quantities, checks


CHECKS = {
    "main-inequality": _check_main_inequality,
    "sandwich": _check_sandwich,
    "trace-bound": _check_trace_bound,
    "dyn-convexity": _check_dyn_convexity,
}


def cmd_check(args):
    if args.name not in CHECKS:
        raise SpecParseError(
            f"unknown check {args.name!r}; choose from {sorted(CHECKS)}"
        )
    quantities, checks = CHECKS[args.name](args)
    return (
        _report.make_report(f"check:{args.name}", _config(args), quantities, checks),
        all(c["passed"] for c in checks),
    )


def cmd_orbits(args):
    region = load_region(args.region)
    records = toric.enumerate_orbits(region, T_max=args.T_max, grid=args.grid)
    listing = []
    for rec in records:
        ham = toric.lcz_toric_orbit(rec, region)
        listing.append(
            {
                "support": list(rec.support),
                "period": rec.period,
                "moment_point": rec.moment_point,
                "rotation_vector": rec.rotation_vector,
                "family": rec.family,
                "lcz_hamiltonian": ham.value,
                "lcz_reeb": ham.value + 1,
                "exact": ham.exact,
            }
        )
    quantities = {"orbits": _report.quantity(len(records), "enumeration")}
    extra = {"records": listing}
    return _report.make_report("orbits", _config(args), quantities, [], extra), True


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ruelle",
        description="Ruelle invariants, systoles and index bounds of toric domains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, tol=True):
        p.add_argument("--region", required=True, help="region JSON (inline or path)")
        if tol:
            p.add_argument("--tol", type=float, default=None, help="quadrature rel tol")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="report path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("toric", help="toric quantities of a region")
    common(p)
    p.set_defaults(fn=cmd_toric)

    p = sub.add_parser("estimate-flow", help="Monte-Carlo Ruelle estimate")
    common(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--dump", default=None, help="CSV trajectory dump path")
    p.set_defaults(fn=cmd_estimate_flow)

    p = sub.add_parser("counterexample", help="strained concave region generator")
    common(p, seed=False)
    p.add_argument("--c-target", type=float, required=True, dest="c_target")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--collar", type=float, default=0.01)
    p.set_defaults(fn=cmd_counterexample)

    p = sub.add_parser("check", help="named verification checks")
    p.add_argument("name", help="|".join(sorted(CHECKS)))
    common(p)
    p.add_argument("--region2", default=None, help="outer region (sandwich)")
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--T-max", type=float, default=3.0, dest="T_max")
    p.add_argument("--grid", type=float, default=1e-3)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("orbits", help="closed-orbit enumeration with indices")
    common(p, seed=False)
    p.add_argument("--T-max", type=float, required=True, dest="T_max")
    p.add_argument("--grid", type=float, default=1e-3)
    p.set_defaults(fn=cmd_orbits)

    return parser


def _config(args):
    # output destinations are not part of the computation config
    skip = {"fn", "out", "dump"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        report, passed = args.fn(args)
    except (InputError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except ComputationError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 2
    text = (
        _report.canonical_json(report)
        if args.format == "json"
        else _report.report_to_csv(report)
    )
    _report.write_output(text, args.out)
    print(f"wall_time_s={time.perf_counter() - start:.3f}", file=sys.stderr)
    return 0 if passed else 3


if __name__ == "__main__":
    sys.exit(main())
