"""Command-line front end.

Subcommands: ``dispatch``, ``share``, ``region``, ``verify-region``,
``check-c1``, ``misreport``, ``dump-constraints``.  Exit codes: 0 on
success, 1 on domain errors (infeasible case, non-convergence under
``--strict``, verification mismatches), 2 on usage errors.  JSON output
uses 12-significant-digit floats and sorted keys, so identical inputs
produce byte-identical files.  The ``GRIDSHARE_TOL`` environment variable
overrides the feasibility classification tolerance.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import tolerances
from .centralized import solve_centralized
from .errors import GridShareError
from .flexibility import (
    Halfspace,
    Region,
    compute_region,
    monte_carlo_check,
)
from .model import Case, load_case
from .network import assemble_constraints
from .sharing import check_c1, run_sharing
from .tolerances import Tolerances

__all__ = ["main", "run_cli", "misreport_sweep", "MisreportSweepResult", "SweepRow"]


def _fmt(value):
    """Round floats (recursively) to 12 significant digits for stable output."""
    if isinstance(value, float):
        return float(f"{value:.12g}")
    if isinstance(value, np.floating):
        return float(f"{float(value):.12g}")
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_fmt(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_fmt(v) for v in value]
    if isinstance(value, dict):
        return {k: _fmt(v) for k, v in value.items()}
    return value


def _write_json(path, payload) -> None:
    text = json.dumps(_fmt(payload), indent=1, sort_keys=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def _num(x) -> str:
    return f"{float(x):.12g}"


# ---------------------------------------------------------------------------
# misreport sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    scale: float
    user_centralized: float | None
    user_sharing: float | None
    total_centralized: float | None
    total_sharing: float | None
    centralized_ok: bool
    sharing_ok: bool


@dataclass(frozen=True)
class MisreportSweepResult:
    target_user: int
    rows: tuple[SweepRow, ...]


def misreport_sweep(case: Case, target_user: int, scales,
                    tol: Tolerances = tolerances.DEFAULT) -> MisreportSweepResult:
    """Re-solve both schemes with the target user's cost coefficients scaled.

    The scaled coefficients drive the solves (they change behavior), but
    every reported disutility is evaluated with the TRUE coefficients at
    the resulting demands: misreporting changes what a user does, not what
    it costs them.
    """
    scales = [float(s) for s in scales]
    if any(s2 <= s1 for s1, s2 in zip(scales, scales[1:])):
        raise GridShareError("misreport scales must be strictly increasing")
    try:
        target_idx = next(i for i, u in enumerate(case.users)
                          if u.id == target_user)
    except StopIteration:
        raise GridShareError(f"no user with id {target_user}") from None
    truth = case.users[target_idx]

    rows = []
    for s in scales:
        reported = replace(truth, alpha1=s * truth.alpha1, alpha2=s * truth.alpha2)
        users = list(case.users)
        users[target_idx] = reported
        users = tuple(users)

        cent = solve_centralized(case.grid, users, case.scenario, tol)
        if cent.status == "optimal":
            cent_total = _true_total(case.users, cent.d)
            cent_user = case.users[target_idx].disutility(float(cent.d[target_idx]))
            cent_ok = True
        else:
            cent_total = cent_user = None
            cent_ok = False

        eq = run_sharing(case.grid, users, case.scenario, case.market, tol)
        if eq.converged:
            share_total = _true_total(case.users, eq.d)
            share_user = case.users[target_idx].disutility(float(eq.d[target_idx]))
            share_ok = True
        else:
            share_total = share_user = None
            share_ok = False

        rows.append(SweepRow(s, cent_user, share_user, cent_total, share_total,
                             cent_ok, share_ok))
    return MisreportSweepResult(target_user, tuple(rows))


def _true_total(users, d) -> float:
    return float(sum(u.disutility(float(d[k])) for k, u in enumerate(users)))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _load(args) -> Case:
    case = load_case(args.case)
    market = case.market
    if getattr(args, "a", None) is not None:
        market = replace(market, a=args.a)
    if getattr(args, "eps", None) is not None:
        market = replace(market, eps=args.eps)
    if getattr(args, "max_iters", None) is not None:
        market = replace(market, max_iters=args.max_iters)
    if market is not case.market:
        case = Case(case.grid, case.users, case.scenario, market)
    return case


def _cmd_dispatch(args, tol: Tolerances) -> int:
    case = _load(args)
    sol = solve_centralized(case.grid, case.users, case.scenario, tol)
    payload = {
        "status": sol.status,
        "d": sol.d if sol.d is not None else [],
        "lambda": sol.lam if sol.lam is not None else [],
        "flows": sol.line_flows if sol.line_flows is not None else [],
        "disutility": sol.total_disutility,
    }
    if args.out:
        _write_json(args.out, payload)
    else:
        print(json.dumps(_fmt(payload), sort_keys=True))
    if sol.status != "optimal":
        print("dispatch infeasible: no demand profile satisfies the constraints",
              file=sys.stderr)
        return 1
    return 0


def _cmd_share(args, tol: Tolerances) -> int:
    case = _load(args)
    eq = run_sharing(case.grid, case.users, case.scenario, case.market, tol)
    payload = {
        "converged": eq.converged,
        "iterations": eq.iterations,
        "d": eq.d,
        "b": eq.b,
        "lambda": eq.lam,
        "q": eq.q,
        "residual": eq.trace.records[-1].residual if len(eq.trace) else 0.0,
    }
    if args.out:
        _write_json(args.out, payload)
    else:
        print(json.dumps(_fmt(payload), sort_keys=True))
    if args.trace:
        ids = [u.id for u in case.users]
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "user_id", "b", "lambda", "d", "residual"])
            for rec in eq.trace:
                for k, uid in enumerate(ids):
                    writer.writerow([rec.n, uid, _num(rec.b[k]),
                                     _num(rec.lam[k]), _num(rec.d[k]),
                                     _num(rec.residual)])
    if not eq.converged:
        print(f"bidding loop did not converge in {eq.iterations} iterations",
              file=sys.stderr)
        if args.strict:
            return 1
    return 0


def _parse_wmax(text: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise GridShareError(f"--wmax expects comma-separated numbers, got {text!r}")
    return vals


def _region_payload(region: Region) -> dict:
    return {
        "dim": region.dim,
        "halfspaces": [{"normal": h.normal, "offset": h.offset}
                       for h in region.halfspaces],
        "vertices": region.vertices,
        "cuts": [{"iter": c.iteration, "u": c.u_max, "r": c.r_max,
                  "vertex": c.vertex} for c in region.cut_log],
        "init_lo": region.init_lo,
        "init_hi": region.init_hi,
        "complete": region.complete,
    }


def _region_from_payload(raw: dict) -> Region:
    hs = tuple(Halfspace(np.array(h["normal"], dtype=float), float(h["offset"]))
               for h in raw["halfspaces"])
    from .flexibility import CutRecord

    cuts = tuple(CutRecord(int(c["iter"]), np.array(c["u"], dtype=float),
                           np.array(c.get("vertex", []), dtype=float),
                           float(c["r"])) for c in raw.get("cuts", []))
    return Region(int(raw["dim"]), hs,
                  np.array(raw["vertices"], dtype=float).reshape(-1, int(raw["dim"])),
                  cuts,
                  np.array(raw["init_lo"], dtype=float),
                  np.array(raw["init_hi"], dtype=float),
                  bool(raw["complete"]))


def _cmd_region(args, tol: Tolerances) -> int:
    case = _load(args)
    csys = assemble_constraints(case.grid, case.users, tol)
    region = compute_region(csys, _parse_wmax(args.wmax), tol=tol)
    payload = _region_payload(region)
    if args.out:
        _write_json(args.out, payload)
    else:
        print(json.dumps(_fmt(payload), sort_keys=True))
    if not region.complete:
        print("region incomplete: cutting-plane cap reached", file=sys.stderr)
        return 1
    return 0


def _cmd_verify_region(args, tol: Tolerances) -> int:
    case = _load(args)
    csys = assemble_constraints(case.grid, case.users, tol)
    if args.region:
        with open(args.region, encoding="utf-8") as fh:
            region = _region_from_payload(json.load(fh))
    elif args.wmax:
        region = compute_region(csys, _parse_wmax(args.wmax), tol=tol)
    else:
        raise GridShareError("verify-region needs --region FILE or --wmax LIST")
    report = monte_carlo_check(csys, region, args.samples, args.seed,
                               jobs=args.jobs, tol=tol)
    payload = {
        "samples": report.n_samples,
        "excluded": report.n_excluded,
        "agreements": report.agreements,
        "mismatches": [{"sample": m["sample"], "w": m["w"],
                        "member": m["member"], "feasible": m["feasible"]}
                       for m in report.mismatches],
    }
    if args.out:
        _write_json(args.out, payload)
    print(f"samples={report.n_samples} excluded={report.n_excluded} "
          f"mismatches={len(report.mismatches)}")
    return 1 if report.mismatches else 0


def _cmd_check_c1(args, tol: Tolerances) -> int:
    case = _load(args)
    rep = check_c1(case.users, case.market.a)
    print(f"holds={'true' if rep.holds else 'false'} margin={rep.margin:.6g}")
    if args.out:
        _write_json(args.out, {"holds": rep.holds, "margin": rep.margin,
                               "a": case.market.a})
    return 0


def _parse_scale_range(text: str):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise GridShareError(
            f"--scale-range expects LO:HI:STEP, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise GridShareError("--scale-range needs LO <= HI and STEP > 0")
    n = int(round((hi - lo) / step))
    scales = [lo + k * step for k in range(n + 1)]
    if scales[-1] > hi + 1e-12:
        scales.pop()
    return scales


def _cmd_misreport(args, tol: Tolerances) -> int:
    case = _load(args)
    scales = _parse_scale_range(args.scale_range)
    result = misreport_sweep(case, args.user, scales, tol)
    rows = result.rows
    out = args.out or "misreport.csv"
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scale", "user_centralized", "user_sharing",
                         "total_centralized", "total_sharing",
                         "centralized_ok", "sharing_ok"])
        for r in rows:
            writer.writerow([
                _num(r.scale),
                _num(r.user_centralized) if r.centralized_ok else "",
                _num(r.user_sharing) if r.sharing_ok else "",
                _num(r.total_centralized) if r.centralized_ok else "",
                _num(r.total_sharing) if r.sharing_ok else "",
                str(r.centralized_ok).lower(),
                str(r.sharing_ok).lower(),
            ])
    return 0


def _cmd_dump_constraints(args, tol: Tolerances) -> int:
    case = _load(args)
    csys = assemble_constraints(case.grid, case.users, tol)
    d_cols = sorted(csys.d_index, key=csys.d_index.get)
    w_cols = sorted(csys.w_index, key=csys.w_index.get)
    out = args.out or "constraints.csv"
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row"] + [f"d:{uid}" for uid in d_cols]
                        + [f"w:{pid}" for pid in w_cols] + ["c"])
        for i, label in enumerate(csys.row_labels):
            writer.writerow([label]
                            + [_num(v) for v in csys.a_mat[i]]
                            + [_num(v) for v in csys.b_mat[i]]
                            + [_num(csys.c[i])])
    return 0


# ---------------------------------------------------------------------------
# parser and entry points
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridshare",
        description="Peer-to-peer energy sharing: dispatch, market equilibria "
                    "and absorbable regions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_case(p):
        p.add_argument("--case", required=True, help="case JSON file")
        p.add_argument("--a", type=float, default=None,
                       help="override market sensitivity")
        p.add_argument("--eps", type=float, default=None,
                       help="override bid convergence tolerance")
        p.add_argument("--max-iters", type=int, default=None,
                       help="override bidding iteration cap")

    p = sub.add_parser("dispatch", help="centralized optimal dispatch")
    add_case(p)
    p.add_argument("--out", default=None)

    p = sub.add_parser("share", help="run the bidding loop to equilibrium")
    add_case(p)
    p.add_argument("--out", default=None)
    p.add_argument("--trace", default=None, help="write per-iteration CSV")
    p.add_argument("--strict", action="store_true",
                   help="exit 1 when the loop does not converge")

    p = sub.add_parser("region", help="compute the absorbable region")
    add_case(p)
    p.add_argument("--wmax", required=True,
                   help="comma-separated output capacities, e.g. 5,5")
    p.add_argument("--out", default=None)

    p = sub.add_parser("verify-region",
                       help="Monte-Carlo check of a region against the "
                            "feasibility LP")
    add_case(p)
    p.add_argument("--region", default=None, help="region JSON from 'region'")
    p.add_argument("--wmax", default=None,
                   help="recompute the region with these capacities")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=0,
                   help="parallel feasibility solves (0 = sequential)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("check-c1",
                       help="sufficient convergence condition of the loop")
    add_case(p)
    p.add_argument("--out", default=None)

    p = sub.add_parser("misreport",
                       help="disutility impact of one user misreporting")
    add_case(p)
    p.add_argument("--user", type=int, required=True, help="target user id")
    p.add_argument("--scale-range", default="0.2:4.0:0.2",
                   help="LO:HI:STEP coefficient scales")
    p.add_argument("--out", default=None)

    p = sub.add_parser("dump-constraints",
                       help="write the compact constraint matrices as CSV")
    add_case(p)
    p.add_argument("--out", default=None)
    return parser


_COMMANDS = {
    "dispatch": _cmd_dispatch,
    "share": _cmd_share,
    "region": _cmd_region,
    "verify-region": _cmd_verify_region,
    "check-c1": _cmd_check_c1,
    "misreport": _cmd_misreport,
    "dump-constraints": _cmd_dump_constraints,
}


def run_cli(argv=None) -> int:
    """Parse and run; returns the exit code instead of exiting."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    tol = tolerances.from_env()
    try:
        return _COMMANDS[args.command](args, tol)
    except GridShareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
