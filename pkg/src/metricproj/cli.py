"""Command-line front end: build, solve, bench, schedule.

Exit codes: 0 success, 1 usage error, 2 input error, 3 verification
failure.  METRICPROJ_MAX_WORKERS caps the worker count (useful in CI).
"""

import argparse
import json
import os
import sys

from . import core, instance, schedule, solver


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _worker_cap():
    cap = os.environ.get("METRICPROJ_MAX_WORKERS")
    return int(cap) if cap else None


def _int_list(text):
    return [int(tok) for tok in text.split(",") if tok]


def build_parser():
    parser = _Parser(prog="metricproj",
                     description="Parallel Dykstra solver for metric-constrained LP relaxations")
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="edge list -> instance file")
    p_build.add_argument("--graph", required=True)
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--offset", type=float, default=instance.DEFAULT_SIGN_OFFSET,
                         help="sign offset applied to every pair score")
    p_build.add_argument("--epsilon", type=float, default=0.2)

    p_solve = sub.add_parser("solve", help="run the solver on an instance file")
    p_solve.add_argument("--instance", required=True)
    p_solve.add_argument("--workers", type=int, default=1)
    p_solve.add_argument("--tile", type=int, default=40)
    p_solve.add_argument("--schedule", default="tiled", choices=solver.SCHEDULE_KINDS)
    p_solve.add_argument("--passes", type=int, default=None,
                         help="run exactly this many passes (benchmark mode)")
    p_solve.add_argument("--max-passes", type=int, default=100)
    p_solve.add_argument("--tol-gap", type=float, default=1e-4)
    p_solve.add_argument("--tol-viol", type=float, default=1e-4)
    p_solve.add_argument("--epsilon", type=float, default=None,
                         help="override the instance's regularization parameter")
    p_solve.add_argument("--out", default=None, help="solution dump path")
    p_solve.add_argument("--stats", default=None, help="JSON-lines stats path")

    p_bench = sub.add_parser("bench", help="fixed-pass timing over worker/tile grids")
    p_bench.add_argument("--instance", required=True)
    p_bench.add_argument("--workers", type=_int_list, default=[1])
    p_bench.add_argument("--tile", type=_int_list, default=[40])
    p_bench.add_argument("--passes", type=int, default=20)
    p_bench.add_argument("--out", default=None, help="machine-readable report path")

    p_sched = sub.add_parser("schedule", help="dump rounds and worker assignments")
    p_sched.add_argument("--n", type=int, required=True)
    p_sched.add_argument("--tile", type=int, default=1)
    p_sched.add_argument("--workers", type=int, default=1)
    p_sched.add_argument("--verify", action="store_true",
                         help="run partition/independence checks; exit 3 on failure")
    return parser


def cmd_build(args):
    graph = instance.load_edge_list(args.graph)
    comp = instance.largest_component(graph)
    inst = instance.cc_instance(comp, offset=args.offset, epsilon=args.epsilon)
    instance.save_instance(inst, args.out)
    print(f"built instance: n = {inst.n}, pairs = {inst.npairs}, "
          f"component of {graph.n}-node graph -> {args.out}")
    return 0


def _capped_workers(requested):
    cap = _worker_cap()
    if cap is not None and requested > cap:
        print(f"capping workers at {cap} (METRICPROJ_MAX_WORKERS)", file=sys.stderr)
        return cap
    return requested


def cmd_solve(args):
    inst = instance.load_instance(args.instance)
    config = solver.SolverConfig(
        workers=_capped_workers(args.workers),
        tile_size=args.tile,
        schedule_kind=args.schedule,
        epsilon=args.epsilon,
        fixed_passes=args.passes,
        max_passes=args.max_passes,
        tol_gap=args.tol_gap,
        tol_violation=args.tol_viol,
    )
    stats_fh = open(args.stats, "w") if args.stats else None
    try:
        sol = solver.solve(inst, config, stats_stream=stats_fh)
    finally:
        if stats_fh:
            stats_fh.close()
    if args.out:
        core.write_solution(sol.state, args.out)
    last = sol.stats[-1]
    print(f"passes = {sol.passes_run}  converged = {sol.converged}")
    print(f"gap = {last.duality_gap:.6g}  violation = {last.max_violation:.6g}  "
          f"pass-loop seconds = {sol.pass_seconds:.3f}")
    return 0


def cmd_bench(args):
    inst = instance.load_instance(args.instance)
    # warm the compiled kernels so the first timed row is comparable
    solver.solve(inst, solver.SolverConfig(workers=1, tile_size=args.tile[0],
                                           fixed_passes=1))
    rows = []
    for p in args.workers:
        p = _capped_workers(p)
        for b in args.tile:
            config = solver.SolverConfig(workers=p, tile_size=b,
                                         schedule_kind="tiled",
                                         fixed_passes=args.passes)
            sol = solver.solve(inst, config)
            rows.append({"workers": p, "tile": b, "passes": args.passes,
                         "seconds": sol.pass_seconds})
    baseline = next((r for r in rows if r["workers"] == 1), rows[0])
    for r in rows:
        r["speedup"] = baseline["seconds"] / r["seconds"] if r["seconds"] > 0 else float("inf")
    print(f"{'workers':>8} {'tile':>6} {'passes':>7} {'seconds':>10} {'speedup':>8}")
    for r in rows:
        print(f"{r['workers']:>8} {r['tile']:>6} {r['passes']:>7} "
              f"{r['seconds']:>10.3f} {r['speedup']:>8.2f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"n": inst.n, "rows": rows}, fh, indent=2)
    return 0


def cmd_schedule(args):
    if args.tile == 1:
        rounds = schedule.diagonal_rounds(args.n)
    else:
        rounds = schedule.tiled_rounds(args.n, args.tile)
    p = _capped_workers(args.workers)
    for r, rnd in enumerate(rounds):
        parts = []
        for pos, unit in enumerate(rnd.units):
            w = rnd.worker_of(pos, p)
            if isinstance(unit, schedule.Tile):
                # leading clipped tiles have base row < 0; show row 1
                parts.append(f"T_{{{max(unit.x, 0) + 1},{unit.z + 1}}} -> worker {w}")
            else:
                parts.append(f"S_{{{unit.i + 1},{unit.k + 1}}} -> worker {w}")
        print(f"round {r}: " + ", ".join(parts))
    if args.verify:
        ok_part = schedule.verify_partition(rounds, args.n)
        ok_ind = schedule.verify_independence(rounds, args.n)
        print(f"partition: {'ok' if ok_part else 'FAILED'}  "
              f"independence: {'ok' if ok_ind else 'FAILED'}")
        if not (ok_part and ok_ind):
            return 3
    return 0


_COMMANDS = {
    "build": cmd_build,
    "solve": cmd_solve,
    "bench": cmd_bench,
    "schedule": cmd_schedule,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
