"""Command-line surface: generate, solve, verify, bench.

Exit codes for `solve`: 0 on Optimal, 2 on IterationLimit, 3 on
NumericalFailure. `verify` exits 0 iff the relative Wasserstein error
against the reference solver is at most 1e-5. CSV output follows a
fixed, versioned column layout so benchmark sweeps stay parseable.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import instance as inst_mod
from . import ipm, oracle

CSV_COLUMNS = [
    "id", "m", "n", "metric", "status", "objective", "ipm_iters", "cg_iters",
    "iter_phase", "dir_phase", "max_fill_pct", "final_support", "wall_ms", "rwe",
]

STATUS_EXIT = {"Optimal": 0, "IterationLimit": 2, "NumericalFailure": 3}


def _config_from_args(args) -> ipm.SolverConfig:
    cfg = ipm.SolverConfig()
    for name in ("tol", "max_ipm_iters", "max_cg_iters", "max_correctors",
                 "support_multiplier", "refresh_period", "switch_threshold",
                 "seed", "c_max", "serial"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    return cfg


def _config_hash(cfg) -> str:
    text = repr(sorted((k, v) for k, v in vars(cfg).items() if k != "inspector"))
    return hashlib.sha1(text.encode()).hexdigest()[:10]


def _append_csv(path, row):
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            writer.writeheader()
        writer.writerow(row)


def _run_record(instance_id, inst, report, wall_ms, rwe_value=None):
    return {
        "id": instance_id,
        "m": inst.m,
        "n": inst.n,
        "metric": inst.metric_name,
        "status": report.status,
        "objective": repr(report.objective),
        "ipm_iters": report.ipm_iters,
        "cg_iters": report.cg_iters_total,
        "iter_phase": report.iterative_phase_iters,
        "dir_phase": report.direct_phase_iters,
        "max_fill_pct": f"{report.max_fill_percent:.4f}",
        "final_support": report.final_support_size,
        "wall_ms": f"{wall_ms:.2f}",
        "rwe": "" if rwe_value is None else repr(rwe_value),
    }


def cmd_generate(args):
    if args.res < 2:
        print("error: --res must be >= 2", file=sys.stderr)
        return 2
    inst = inst_mod.make_synthetic_instance(
        args.res, args.kind, args.seed, metric=args.metric)
    inst_mod.write_instance(inst, args.out)
    print(f"wrote {args.out} ({args.kind}, res={args.res}, metric={args.metric})")
    return 0


def _solve_one(path, cfg, metric_override=None):
    inst = inst_mod.read_instance(path)
    if metric_override and isinstance(inst.cost, inst_mod.GridMetric):
        inst = inst_mod.OTInstance(
            a=inst.a, b=inst.b,
            cost=inst_mod.GridMetric(inst.cost.res_rows, inst.cost.res_cols,
                                     metric_override))
    t0 = time.perf_counter()
    plan, y, report = ipm.solve(inst, cfg)
    wall_ms = 1000.0 * (time.perf_counter() - t0)
    return inst, plan, y, report, wall_ms


def cmd_solve(args):
    cfg = _config_from_args(args)
    try:
        inst, plan, y, report, wall_ms = _solve_one(args.instance, cfg, args.metric)
    except (inst_mod.InstanceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"status={report.status} objective={report.objective:.12g} "
          f"W_{report.wasserstein_q}={report.wasserstein:.12g} "
          f"ipm_iters={report.ipm_iters} cg_iters={report.cg_iters_total} "
          f"support={report.final_support_size}")
    if args.telemetry:
        print(f"phase log: iterative={report.iterative_phase_iters} "
              f"direct={report.direct_phase_iters} "
              f"switches={report.switch_count} "
              f"max_fill_pct={report.max_fill_percent:.3f}")
        for entry in report.phase_log:
            print("  iter {iter:3d} [{phase:9s}] support={support:6d} "
                  "mu={mu:9.3e} cg={cg_iters:4d} fill={fill_pct:6.2f}%".format(**entry))
    if args.csv_out:
        rid = Path(args.instance).stem + "-" + _config_hash(cfg)
        _append_csv(args.csv_out, _run_record(rid, inst, report, wall_ms))
    return STATUS_EXIT[report.status]


def cmd_verify(args):
    cfg = _config_from_args(args)
    try:
        inst, plan, y, report, wall_ms = _solve_one(args.instance, cfg, None)
    except (inst_mod.InstanceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if inst.m * inst.n > oracle.ORACLE_VARIABLE_CAP:
        print("error: instance exceeds the reference solver cap; "
              "use a smaller instance", file=sys.stderr)
        return 2
    ref = oracle.reference_solve(inst)
    q = report.wasserstein_q
    ref_w = ref.objective ** (1.0 / q) if ref.objective > 0 else ref.objective
    err, absolute = oracle.rwe(report.wasserstein, ref_w)
    tag = "absolute diff" if absolute else "RWE"
    print(f"solver objective  {report.objective:.12g}")
    print(f"oracle objective  {ref.objective:.12g}")
    print(f"{tag}  {err:.3e}")
    return 0 if err <= 1e-5 else 1


def cmd_bench(args):
    cfg = _config_from_args(args)
    jobs = []
    for kind in args.kinds:
        for res in args.res:
            for seed in range(args.seeds):
                jobs.append((kind, res, seed))
    workers = int(os.environ.get("OTKIT_THREADS", "1"))
    if args.serial:
        workers = 1
    results = []
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_bench_one, kind, res, seed, cfg, args.metric)
                       for kind, res, seed in jobs]
            results = [f.result() for f in futures]
    else:
        results = [_bench_one(kind, res, seed, cfg, args.metric)
                   for kind, res, seed in jobs]
    worst = 0
    for rid, inst, report, wall_ms, rwe_value in results:
        _append_csv(args.csv_out, _run_record(rid, inst, report, wall_ms, rwe_value))
        print(f"{rid}: {report.status} obj={report.objective:.6g} "
              f"iters={report.ipm_iters} wall={wall_ms:.1f}ms")
        worst = max(worst, STATUS_EXIT[report.status])
    print(f"wrote {len(results)} rows to {args.csv_out}")
    return worst


def _bench_one(kind, res, seed, cfg, metric):
    inst = inst_mod.make_synthetic_instance(res, kind, seed, metric=metric)
    t0 = time.perf_counter()
    plan, y, report = ipm.solve(inst, cfg)
    wall_ms = 1000.0 * (time.perf_counter() - t0)
    rwe_value = None
    if inst.m * inst.n <= oracle.ORACLE_VARIABLE_CAP:
        ref = oracle.reference_solve(inst)
        q = report.wasserstein_q
        ref_w = ref.objective ** (1.0 / q) if ref.objective > 0 else ref.objective
        rwe_value, _ = oracle.rwe(report.wasserstein, ref_w)
    rid = f"{kind}-r{res}-s{seed}-{_config_hash(cfg)}"
    return rid, inst, report, wall_ms, rwe_value


def _add_solver_flags(p):
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-ipm-iters", dest="max_ipm_iters", type=int, default=None)
    p.add_argument("--max-cg-iters", dest="max_cg_iters", type=int, default=None)
    p.add_argument("--max-correctors", dest="max_correctors", type=int, default=None)
    p.add_argument("--support-multiplier", dest="support_multiplier",
                   type=float, default=None)
    p.add_argument("--refresh-period", dest="refresh_period", type=int, default=None)
    p.add_argument("--switch-threshold", dest="switch_threshold",
                   type=float, default=None)
    p.add_argument("--c-max", dest="c_max", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--serial", action="store_true", default=None,
                   help="force deterministic single-threaded execution")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="otkit",
        description="Sparse interior-point solver for discrete optimal transport LPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic instance file")
    g.add_argument("--kind", choices=inst_mod.GENERATOR_KINDS, required=True)
    g.add_argument("--res", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--metric", choices=["L1", "L2", "LINF"], default="L2")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve an OTIMG/OTLP instance file")
    s.add_argument("instance")
    s.add_argument("--metric", choices=["L1", "L2", "LINF"], default=None,
                   help="override the metric of a grid instance")
    s.add_argument("--csv-out", dest="csv_out", default=None)
    s.add_argument("--telemetry", action="store_true")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="solve and compare against the exact reference")
    v.add_argument("instance")
    _add_solver_flags(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="sweep synthetic instances into a CSV")
    b.add_argument("--kinds", nargs="+", choices=inst_mod.GENERATOR_KINDS,
                   default=["uniform-random"])
    b.add_argument("--res", nargs="+", type=int, default=[8])
    b.add_argument("--seeds", type=int, default=1)
    b.add_argument("--metric", choices=["L1", "L2", "LINF"], default="L2")
    b.add_argument("--csv-out", dest="csv_out", required=True)
    _add_solver_flags(b)
    b.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except Exception as exc:  # the shell contract is exit codes, not tracebacks
        print(f"error: {exc}", file=sys.stderr)
        code = 3
    return code


if __name__ == "__main__":
    sys.exit(main())
