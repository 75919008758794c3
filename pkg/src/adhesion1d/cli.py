"""Command-line front end.

    adhesion1d run|verify|entropy|gradflow|bench [options]

Outputs go to ``<out>/<scenario-id>/`` together with a ``manifest.json``.
Exit codes: 0 success, 1 a check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, _kernels
from .scenario import SUITES, ReportRecord, Scenario, ScenarioError, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
GODUNOV_DX = (1 / 100, 1 / 200, 1 / 400)
GRADFLOW_H = (0.04, 0.02, 0.01)
LIMIT_H = 2e-3
ROUNDOFF_FLOOR = 1e-12  # error changes below this are round-off, not growth


def _write(directory: Path, name: str, text: str, artifacts: list) -> None:
    (directory / name).write_text(text)
    artifacts.append(name)


def _table_csv(rows) -> str:
    lines = ["param,error"]
    lines += [f"{float(p)!r},{float(e)!r}" for p, e in rows]
    return "\n".join(lines) + "\n"


def _report_csv(records) -> str:
    lines = ["scenario_id,check,status,measured,threshold"]
    for r in records:
        check = r.check.replace('"', "'")
        lines.append(f'{r.scenario_id},"{check}",{r.status},{r.measured!r},{r.threshold!r}')
    return "\n".join(lines) + "\n"


def _positive(times):
    return [t for t in times if t > 0]


# -- per-scenario jobs (module level so they pickle for the process pool) ----------

def job_run(sc: Scenario, state, opts):
    from .particles import ParticleSystem, events_csv, trajectory_csv
    from .semigroup import LagrangianState, step
    out, artifacts = [], []
    d = opts["dir"]
    sysm = ParticleSystem(state)
    rows = sysm.trajectory(sc.times)
    _write(d, "trajectory.csv", trajectory_csv(rows), artifacts)
    sysm.evolve(sc.times[-1] if sc.times else 0.0)
    _write(d, "events.csv", events_csv(sysm.events), artifacts)
    s0 = LagrangianState.from_state(state, scenario_id=sc.id)
    snaps = [f"# scenario={sc.id}", "t,w_left,X,V"]
    for t in sc.times:
        body = step(s0, t).snapshot_csv().splitlines()[2:]
        snaps.extend(body)
    _write(d, "snapshots.csv", "\n".join(snaps) + "\n", artifacts)
    return out, artifacts


def job_verify(sc: Scenario, state, opts):
    from .verify import run_suites
    recs = run_suites(sc, state, opts["suites"], opts["tol"])
    artifacts = []
    if opts["format"] == "json":
        _write(opts["dir"], "report.json",
               json.dumps([r.as_dict() for r in recs], indent=2, allow_nan=True) + "\n",
               artifacts)
    else:
        _write(opts["dir"], "report.csv", _report_csv(recs), artifacts)
    return recs, artifacts


def job_entropy(sc: Scenario, state, opts):
    from .hopf import godunov_oracle, hopf_solution
    from .verify import hopf_gap
    recs, artifacts = [], []
    tol = sc.tol("hopf", opts["tol"])
    for k, t in enumerate(sc.times):
        sol = hopf_solution(state, t)
        _write(opts["dir"], f"cdf_{k:03d}.csv", sol.csv(), artifacts)
        recs.append(ReportRecord(sc.id, f"hopf_vs_particles[t={t:g}]", hopf_gap(state, t), tol))
    pos = _positive(sc.times)
    if pos:
        T = pos[-1]
        exact = hopf_solution(state, T)
        errs = [(dx, godunov_oracle(state, T, dx).l1_distance(exact)) for dx in GODUNOV_DX]
        _write(opts["dir"], "godunov_convergence.csv", _table_csv(errs), artifacts)
        incr = max(b - a for (_, a), (_, b) in zip(errs, errs[1:]))
        recs.append(ReportRecord(sc.id, "godunov_error_increase", incr, ROUNDOFF_FLOOR))
    return recs, artifacts


def job_gradflow(sc: Scenario, state, opts):
    from .gradflow import exact_flow, gradient_flow_run, limit_construction, perturbed_initial
    from .semigroup import LagrangianState, step
    from .stepfn import lp_distance
    recs, artifacts = [], []
    pos = _positive(sc.times)
    if not pos:
        return recs, artifacts
    T = pos[-1]
    _write(opts["dir"], "limit.csv", _table_csv(limit_construction(state, T, h=LIMIT_H)),
           artifacts)
    s0 = LagrangianState.from_state(state)
    Xt = step(s0, T).X
    exact = []
    for k in range(7):
        e = T / 2 ** k
        Xg = exact_flow(perturbed_initial(state, e), s0.X, math.log(T / e))
        exact.append((e, lp_distance(Xg, Xt)))
    # closed-form flow, separates integrator error from the limit itself
    _write(opts["dir"], "limit_exact.csv", _table_csv(exact), artifacts)
    eps = T / 16
    Xe = step(s0, eps).X
    rows = []
    for h in GRADFLOW_H:
        p = gradient_flow_run(Xe, s0.X, math.log(T / eps), h)
        rows.append((h, max(lp_distance(X, step(s0, eps * math.exp(tau)).X)
                            for tau, X in zip(p.tau, p.X))))
    _write(opts["dir"], "order.csv", _table_csv(rows), artifacts)
    return recs, artifacts


JOBS = {"run": job_run, "verify": job_verify, "entropy": job_entropy, "gradflow": job_gradflow}


def _update_manifest(d: Path, sc: Scenario, cmd: str, entry: dict) -> None:
    """One manifest per scenario directory, one entry per command run there."""
    path = d / "manifest.json"
    doc = {}
    if path.exists():
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError:
            doc = {}
    if doc.get("scenario") != sc.id or not isinstance(doc.get("commands"), dict):
        doc = {"scenario": sc.id, "commands": {}}
    doc["version"] = __version__
    doc["commands"][cmd] = entry
    doc["artifacts"] = sorted({a for e in doc["commands"].values() for a in e["artifacts"]}
                              | {"manifest.json"})
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _execute(args):
    cmd, sc, state, opts = args
    d = Path(opts["out"]) / sc.id
    d.mkdir(parents=True, exist_ok=True)
    opts = {**opts, "dir": d}
    recs, artifacts = JOBS[cmd](sc, state, opts)
    _update_manifest(d, sc, cmd, {
        "config_hash": sc.config_hash(opts["hashed"]),
        "seed": sc.seed,
        "kernel_backend": _kernels.BACKEND,
        "artifacts": sorted(artifacts),
        "checks": {"total": len(recs), "failed": sum(r.status == "fail" for r in recs)},
    })
    return sc.id, recs


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adhesion1d", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=os.environ.get("ADHESION1D_OUT", "adhesion1d-out"),
                        help="output directory (default: $ADHESION1D_OUT or ./adhesion1d-out)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    for name, helptext in (("run", "simulate and write trajectories and quantile snapshots"),
                           ("verify", "run property suites"),
                           ("entropy", "Hopf-formula CDFs and the Godunov comparison"),
                           ("gradflow", "gradient-flow limit and integrator-order tables")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--scenario", action="append", required=True, metavar="PATH",
                       help="scenario JSON (repeatable)")
        p.add_argument("--tol", type=float, default=None, help="override every check tolerance")
        p.add_argument("--suite", action="append", choices=SUITES, default=None)
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--renormalize", action="store_true",
                       help="rescale masses that do not sum to 1")
    b = sub.add_parser("bench", parents=[common], help="time proj_k and a fully merging evolve")
    b.add_argument("--n", type=int, action="append", default=None,
                   help="problem size (repeatable; default 1e3..1e6)")
    b.add_argument("--backend", action="append", choices=("cython", "python"), default=None)
    return ap


def _cmd_bench(args) -> int:
    from .bench import bench_csv, run_bench
    ns = args.n or [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6]
    if any(n < 1 for n in ns):
        print("error: --n must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    avail = _kernels.available_backends()
    for name in args.backend or []:
        if name not in avail:
            print(f"error: backend {name!r} is not available", file=sys.stderr)
            return EXIT_INPUT
    rows = run_bench(ns, seed=args.seed or 0, backends=args.backend)
    d = Path(args.out) / "bench"
    d.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        (d / "bench.json").write_text(json.dumps(rows, indent=2) + "\n")
    else:
        (d / "bench.csv").write_text(bench_csv(rows))
    print(bench_csv(rows), end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    tasks = []
    try:
        for path in args.scenario:
            sc = load_scenario(path)
            if args.seed is not None:
                sc.seed = args.seed
            state = sc.state(renormalize=args.renormalize)
            hashed = {"command": args.command, "tol": args.tol, "suites": args.suite,
                      "renormalize": args.renormalize, "format": args.format}
            opts = {"out": args.out, "tol": args.tol, "suites": args.suite,
                    "format": args.format, "hashed": hashed}
            tasks.append((args.command, sc, state, opts))
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = [_execute(t) for t in tasks]
    failed = 0
    for sid, recs in results:
        bad = [r for r in recs if r.status == "fail"]
        failed += len(bad)
        for r in bad:
            print(f"FAIL {sid} {r.check}: measured {r.measured:.3e} > {r.threshold:.3e}")
        if recs:
            print(f"{sid}: {len(recs) - len(bad)}/{len(recs)} checks passed")
        else:
            print(f"{sid}: wrote {Path(args.out) / sid}")
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
