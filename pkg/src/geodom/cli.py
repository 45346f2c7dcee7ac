"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 not converged, 3 boundary collapse,
4 a requested hypothesis check failed, 5 checks indeterminate (none failed),
6 the compatibility condition for the potential failed.
"""

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, gallery
from . import jacobi as jc
from . import pathspace as ps
from . import problem as pb
from .convexity import FAIL, INDETERMINATE, check_hypotheses
from .domain import Box
from .errors import GeodomError, ProblemDefinitionError
from .solver import _json_default, solve, solve_multiplicity

log = logging.getLogger("geodom")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_COLLAPSE, EXIT_CHECK_FAIL, EXIT_INDETERMINATE, EXIT_REP = range(7)
JHES_SAMPLES = 200
COMMANDS = ("solve", "check-hypotheses", "jacobi")


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n"


def threads():
    """Worker pool size: ``GEODOM_THREADS`` if set, else up to 4 cores."""
    try:
        return max(1, int(os.environ["GEODOM_THREADS"]))
    except (KeyError, ValueError):
        return max(1, min(4, os.cpu_count() or 1))


class Output:
    """Collects artifacts in memory and writes them under ``out_dir``."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir) if out_dir else None
        self.files = {}

    def add(self, name, text):
        self.files[name] = text

    def flush(self):
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (self.out_dir / name).write_text(text, encoding="utf-8")


def run_bundle(pd, reports):
    """Run record: problem hash, reports, tool version, timestamp."""
    return {
        "problem_hash": pd.hash,
        "problem": pd.raw,
        "tool_version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "reports": reports,
    }


def _solve_summary(rep, m):
    return {
        "class": rep.seed_class,
        "converged": rep.converged,
        "failure_reason": rep.failure_reason,
        "f_value": rep.f_value,
        "length": ps.length(rep.path, m) if rep.converged else float("nan"),
        "beta": rep.beta,
    }


def run_solve(pd, out, workers=1):
    b = pd.barrier
    m = pd.manifold
    if pd.classes:
        reports = solve_multiplicity(pd.p, pd.q, b, pd.solver, pd.classes, workers=workers)
        rows = []
        for rep in sorted(list(reports) + reports.dropped, key=lambda r: r.seed_class):
            tag = f"k{rep.seed_class}"
            out.add(f"path_{tag}.csv", ps.path_to_csv(rep.path, b))
            out.add(f"report_{tag}.json", rep.to_json() + "\n")
            out.add(f"history_{tag}.csv", rep.history_csv())
            rows.append(_solve_summary(rep, m))
        status = EXIT_OK if len(reports) else max(r.exit_status for r in reports.dropped)
        summary = {
            "exit": status,
            "classes": rows,
            "distinct": len(reports),
            "f_sorted": [r.f_value for r in reports],
        }
        out.add("report.json", _dump(summary))
        return status, summary
    rep = solve(pd.p, pd.q, b, pd.solver, pd.winding)
    out.add("path.csv", ps.path_to_csv(rep.path, b))
    out.add("report.json", rep.to_json() + "\n")
    out.add("history.csv", rep.history_csv())
    summary = _solve_summary(rep, m)
    summary["exit"] = rep.exit_status
    return rep.exit_status, summary


def run_check(pd, out):
    if pd.checks is None:
        raise ProblemDefinitionError("the problem has no checks block", "checks")
    report = check_hypotheses(pd.barrier, pd.checks)
    out.add("hypotheses.json", report.to_json() + "\n")
    out.add("hypotheses.txt", report.table() + "\n")
    verdicts = {c: report.verdicts[c] for c in pd.checks.checks if c in report.verdicts}
    statuses = [v.status for v in verdicts.values()]
    if FAIL in statuses:
        status = EXIT_CHECK_FAIL
    elif INDETERMINATE in statuses:
        status = EXIT_INDETERMINATE
    else:
        status = EXIT_OK
    summary = {
        "exit": status,
        "verdicts": {c: v.status for c, v in verdicts.items()},
        "reasons": {c: v.reason for c, v in verdicts.items() if v.status != "pass"},
    }
    return status, summary, report


def _jhes_samples(pd, prob, n, seed):
    rng = np.random.default_rng(seed)
    if pd.checks is not None:
        box = pd.checks.box
    else:
        box = Box(np.minimum(pd.p, pd.q) - 1.0, np.maximum(pd.p, pd.q) + 1.0)
    jm = jc.jacobi_metric(prob)
    X = np.empty((0, pd.manifold.dim))
    for _ in range(50):
        cand = box.sample(rng, 4 * n)
        with np.errstate(all="ignore"):
            ok = pd.barrier.inside(cand) & jm.in_chart(cand)
        X = np.vstack([X, cand[ok]])
        if len(X) >= n:
            break
    X = X[:n]
    return X, rng.normal(size=X.shape)


def run_jacobi(pd, out):
    prob = pd.lagrangian
    if prob is None:
        raise ProblemDefinitionError("the problem has no lagrangian block", "lagrangian")
    seed = pd.solver.seed
    X, Vd = _jhes_samples(pd, prob, JHES_SAMPLES, seed)
    jhes = jc.hessian_transform_check(prob, pd.barrier, X, Vd) if len(X) else float("nan")
    rep_result = None
    if pd.checks is not None:
        levels = pd.checks.levels or pd.barrier.level_schedule
        M_prime, verdict, per_level = jc.rep_check(prob, pd.barrier, levels, pd.checks.n_samples, pd.checks.box, seed)
        rep_result = {"M_prime": M_prime, "status": verdict.status, "reason": verdict.reason, "per_level": per_level}
    report, traj = jc.solve_trajectory(prob, pd.p, pd.q, pd.solver, pd.winding)
    status = report.exit_status
    doc = {"jhes_defect": jhes, "rep": rep_result, "solve": _solve_summary(report, jc.jacobi_metric(prob))}
    out.add("path.csv", ps.path_to_csv(report.path, pd.barrier))
    out.add("report.json", report.to_json() + "\n")
    if traj is not None:
        out.add("trajectory.csv", traj.to_csv())
        doc["trajectory"] = {
            "converged": traj.converged,
            "tag": traj.tag,
            "ode_residual": traj.ode_residual,
            "energy_spread": traj.energy_spread,
            "duration": float(traj.t[-1]),
            **traj.diagnostics,
        }
        if status == EXIT_OK and not traj.converged:
            status = EXIT_NOT_CONVERGED
    if status == EXIT_OK and rep_result is not None and rep_result["status"] == FAIL:
        status = EXIT_REP
    out.add("jacobi_report.json", _dump(doc))
    summary = {
        "exit": status,
        "f_value": report.f_value,
        "jhes_defect": jhes,
        "energy_spread": doc.get("trajectory", {}).get("energy_spread", float("nan")),
        "rep": None if rep_result is None else rep_result["status"],
    }
    return status, summary


def execute(kind, pd, out_dir=None, workers=1):
    """Run one command on a parsed problem; returns ``(exit, summary)``."""
    out = Output(out_dir)
    if kind == "solve":
        status, summary = run_solve(pd, out, workers)
    elif kind == "check-hypotheses":
        status, summary, report = run_check(pd, out)
    elif kind == "jacobi":
        status, summary = run_jacobi(pd, out)
    else:
        raise ValueError(f"unknown command {kind!r}")
    out.add("bundle.json", _dump(run_bundle(pd, {kind: summary})))
    out.flush()
    return status, summary


def load_target(target, overrides=None):
    """Parse a problem file, or fetch a gallery problem by name."""
    if os.path.exists(target):
        with open(target, encoding="utf-8") as fh:
            text = fh.read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemDefinitionError(f"{target}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    elif target in gallery.PROBLEMS:
        raw = gallery.get(target)
    else:
        raise ProblemDefinitionError(f"{target}: no such file or gallery problem")
    return pb.from_dict(raw, overrides)


def _csv_list(text, conv=str):
    if text is None:
        return None
    try:
        return [conv(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ProblemDefinitionError(f"expected a comma-separated list, got {text!r}") from None


def _overrides(args):
    return {
        "seed": args.seed,
        "eps0": args.eps0,
        "K": args.k_nodes,
        "levels": _csv_list(args.levels, float),
        "checks": _csv_list(getattr(args, "checks", None)),
    }


# gallery replay

def _close(a, b, rtol):
    if isinstance(a, float) or isinstance(b, float):
        if a is None or b is None:
            return a is b
        if math.isnan(a) and math.isnan(b):
            return True
        return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))
    if isinstance(a, dict) and isinstance(b, dict):
        return set(a) == set(b) and all(_close(a[k], b[k], rtol) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_close(x, y, rtol) for x, y in zip(a, b))
    return a == b


def _comparable(summary):
    # reasons are prose; compare statuses and numbers only
    return {k: v for k, v in summary.items() if k != "reasons"}


def gallery_jobs(name):
    doc = gallery.get(name)
    kinds = ["solve"]
    if doc.get("checks"):
        kinds.append("check-hypotheses")
    if doc.get("lagrangian"):
        kinds.append("jacobi")
    return [(name, k) for k in kinds]


def run_gallery(names, out_dir=None, workers=1, rtol=1e-6):
    """Run every command of every named problem; compare against the fixtures."""
    jobs = [j for n in names for j in gallery_jobs(n)]

    def one(job):
        name, kind = job
        pd = pb.from_dict(gallery.get(name))
        sub = None if out_dir is None else Path(out_dir) / name / kind
        status, summary = execute(kind, pd, sub)
        return name, kind, status, json.loads(json.dumps(summary, default=_json_default))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]

    rows = []
    for name, kind, status, summary in results:
        exp = gallery.expected(name)
        want = None if exp is None else exp.get(kind)
        match = want is not None and _close(_comparable(summary), _comparable(want), rtol)
        rows.append({"problem": name, "command": kind, "exit": status, "summary": summary, "match": match})
    return rows


# argument parsing

def _common(p):
    p.add_argument("--seed", type=int, help="override solver and sampling seed")
    p.add_argument("--out-dir", help="directory for CSV/JSON artifacts")
    p.add_argument("--levels", help="comma-separated level schedule a_0 > a_1 > ...")
    p.add_argument("--eps0", type=float, help="initial penalty weight")
    p.add_argument("--k-nodes", type=int, help="number of path segments K")


def build_parser():
    parser = argparse.ArgumentParser(prog="geodom", description="Geodesics in open domains by penalization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (
        ("solve", "connect p and q by a geodesic inside the domain"),
        ("check-hypotheses", "sample the convexity hypotheses of the barrier"),
        ("jacobi", "fixed-energy trajectory through the Jacobi metric"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("problem", help="problem-definition JSON file or gallery problem name")
        _common(p)
        if name == "check-hypotheses":
            p.add_argument("--checks", help="comma-separated checks, e.g. t1,t2")

    g = sub.add_parser("gallery", help="builtin example problems")
    gsub = g.add_subparsers(dest="gallery_command", required=True)
    gsub.add_parser("list", help="list gallery problems")
    show = gsub.add_parser("show", help="print a gallery problem definition")
    show.add_argument("name")
    run = gsub.add_parser("run-all", help="run every gallery problem and compare with the shipped fixtures")
    run.add_argument("--out-dir")
    run.add_argument("--only", help="comma-separated subset of problems")
    run.add_argument("--write-expected", metavar="DIR", help="write fresh fixtures to DIR")
    return parser


def _print_summary(kind, status, summary):
    print(f"{kind}: exit {status}")
    for k, v in sorted(summary.items()):
        if k != "exit":
            print(f"  {k}: {json.dumps(v, default=_json_default)}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gallery":
            return _gallery_main(args)
        pd = load_target(args.problem, _overrides(args))
        status, summary = execute(args.command, pd, args.out_dir, threads())
        _print_summary(args.command, status, summary)
        return status
    except (ProblemDefinitionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GeodomError as exc:
        # precondition failures (energy level, endpoints outside the domain)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _gallery_main(args):
    if args.gallery_command == "list":
        for name in gallery.names():
            print(f"{name:32s} {gallery.PROBLEMS[name]['description']}")
        return EXIT_OK
    if args.gallery_command == "show":
        try:
            print(json.dumps(gallery.get(args.name), indent=1))
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return EXIT_INPUT
        return EXIT_OK
    names = _csv_list(args.only) or gallery.names()
    unknown = [n for n in names if n not in gallery.PROBLEMS]
    if unknown:
        print(f"error: unknown gallery problems {unknown}", file=sys.stderr)
        return EXIT_INPUT
    rows = run_gallery(names, args.out_dir, threads())
    for r in rows:
        mark = "ok" if r["match"] else "MISMATCH"
        print(f"{r['problem']:32s} {r['command']:17s} exit {r['exit']}  {mark}")
    if args.write_expected:
        out = Path(args.write_expected)
        out.mkdir(parents=True, exist_ok=True)
        by_problem = {}
        for r in rows:
            by_problem.setdefault(r["problem"], {})[r["command"]] = r["summary"]
        for name, doc in by_problem.items():
            (out / f"{name}.json").write_text(_dump(doc), encoding="utf-8")
    return EXIT_OK if all(r["match"] for r in rows) else EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
