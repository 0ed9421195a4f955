"""Full Dykstra passes: parallel metric phase, pair phase, stopping.

A pass visits every metric constraint once (round by round, with a
full barrier after each round) and then every pair constraint once
(pairs partitioned across workers; pair rows touch disjoint variables,
so that phase needs no internal synchronization).  Work assignment is
static, so each worker revisits its constraints in the same order
every pass and can read its sparse dual array with a single cursor.
"""

import time
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import core, schedule, _kernels
from .core import PassStats, PrimalState, DualStore

SCHEDULE_KINDS = ("serial", "diagonal", "tiled")


class SolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    workers: int = 1
    tile_size: int = 40
    epsilon: float = None  # overrides the instance's epsilon when set
    max_passes: int = 100
    fixed_passes: int = None  # benchmark mode: run exactly this many passes
    tol_gap: float = 1e-4
    tol_violation: float = 1e-4
    schedule_kind: str = "tiled"

    def validate(self):
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.tile_size < 1:
            raise ValueError(f"tile_size must be >= 1, got {self.tile_size}")
        if self.schedule_kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule_kind {self.schedule_kind!r}")
        if self.schedule_kind == "serial" and self.workers != 1:
            raise ValueError("serial schedule requires workers = 1")
        if self.tol_gap <= 0 or self.tol_violation <= 0:
            raise ValueError("tolerances must be positive")
        if self.fixed_passes is not None and self.fixed_passes < 1:
            raise ValueError("fixed_passes must be >= 1")


@dataclass
class Solution:
    state: PrimalState
    stats: list
    converged: bool
    passes_run: int
    total_steps: int = 0
    duals: DualStore = None

    @property
    def pass_seconds(self):
        """Time spent in the pass loop only (the benchmark quantity)."""
        return sum(s.wall_time for s in self.stats)


class Plan:
    """Kernel-ready schedule: per-round, per-worker unit base arrays."""

    def __init__(self, n, config):
        config.validate()
        self.n = n
        self.p = config.workers
        self.kind = config.schedule_kind
        self.b = 1 if self.kind == "diagonal" else config.tile_size
        if self.kind == "serial":
            self.rounds = None
            self.kernel_rounds = None
        else:
            if self.kind == "diagonal":
                self.rounds = schedule.diagonal_rounds(n)
            else:
                self.rounds = schedule.tiled_rounds(n, self.b)
            self.kernel_rounds = []
            for rnd in self.rounds:
                per_worker = []
                for w in range(self.p):
                    units = [u for pos, u in enumerate(rnd.units)
                             if rnd.worker_of(pos, self.p) == w]
                    if units:
                        bases = np.array(
                            [(u.x, u.z) if isinstance(u, schedule.Tile)
                             else (u.i, u.k) for u in units],
                            dtype=np.int64)
                        ntrip = sum(u.size for u in units)
                    else:
                        bases = np.empty((0, 2), dtype=np.int64)
                        ntrip = 0
                    per_worker.append((bases, ntrip))
                self.kernel_rounds.append(per_worker)
        m = core.pair_count(n)
        bounds = [w * m // self.p for w in range(self.p + 1)]
        self.pair_ranges = [(bounds[w], bounds[w + 1]) for w in range(self.p)]


def initialize(instance, workers=1):
    """Dykstra start: y = 0 and v = -(1/eps) W^-1 c, i.e. x = 0 and
    f_ij = -w_ij / (eps * Wf_ij)."""
    state = PrimalState(instance.n)
    state.fv[:] = -instance.w_flat / (instance.epsilon * instance.reg_f)
    return state, DualStore(instance.n, workers)


def _worker_pass(w, plan, state, duals, instance, barrier, winvx, winvf):
    eps = instance.epsilon
    rkeys = duals.keys[w]
    rvals = duals.vals[w]
    cursor = 0
    key_chunks = []
    val_chunks = []
    viol = 0.0
    steps = 0
    if plan.kind == "serial":
        cap = core.constraint_count(plan.n, metric_only=True)
        wkeys = np.empty(cap, dtype=np.int64)
        wvals = np.empty(cap)
        cnt, cursor, v_, s_ = _kernels.serial_metric_pass(
            state.xv, plan.n, eps, winvx, rkeys, rvals, cursor, wkeys, wvals)
        if cnt:
            key_chunks.append(wkeys[:cnt].copy())
            val_chunks.append(wvals[:cnt].copy())
        viol = max(viol, v_)
        steps += s_
    else:
        for per_worker in plan.kernel_rounds:
            bases, ntrip = per_worker[w]
            if ntrip:
                wkeys = np.empty(3 * ntrip, dtype=np.int64)
                wvals = np.empty(3 * ntrip)
                cnt, cursor, v_, s_ = _kernels.metric_units_pass(
                    state.xv, plan.n, plan.b, bases, eps, winvx,
                    rkeys, rvals, cursor, wkeys, wvals)
                if cnt:
                    key_chunks.append(wkeys[:cnt].copy())
                    val_chunks.append(wvals[:cnt].copy())
                viol = max(viol, v_)
                steps += s_
            if barrier is not None:
                barrier.wait()
    lo, hi = plan.pair_ranges[w]
    v_, s_ = _kernels.pair_pass(state.xv, state.fv, lo, hi, eps,
                                winvx, winvf, instance.d_flat, duals.pair_duals)
    viol = max(viol, v_)
    steps += s_
    if key_chunks:
        new_keys = np.concatenate(key_chunks)
        new_vals = np.concatenate(val_chunks)
    else:
        new_keys = np.empty(0, dtype=np.int64)
        new_vals = np.empty(0)
    return new_keys, new_vals, viol, steps


def run_pass(state, duals, instance, plan, pool=None, pass_index=0):
    """One full Dykstra pass over all constraints; returns its PassStats.

    Metric rounds are separated by barriers; each worker appends this
    pass's nonzero duals to a fresh array which becomes its read array
    for the next pass.
    """
    winvx = 1.0 / instance.reg_x
    winvf = 1.0 / instance.reg_f
    t0 = time.perf_counter()
    duals.reset_cursors()
    p = plan.p
    if p == 1:
        results = [_worker_pass(0, plan, state, duals, instance, None,
                                winvx, winvf)]
    else:
        barrier = threading.Barrier(p)
        args = [(w, plan, state, duals, instance, barrier, winvx, winvf)
                for w in range(p)]
        if pool is not None:
            futures = [pool.submit(_worker_pass, *a) for a in args]
            results = [f.result() for f in futures]
        else:
            with ThreadPoolExecutor(max_workers=p) as tmp:
                futures = [tmp.submit(_worker_pass, *a) for a in args]
                results = [f.result() for f in futures]
    viol = 0.0
    steps = 0
    for w, (new_keys, new_vals, v_, s_) in enumerate(results):
        duals.keys[w] = new_keys
        duals.vals[w] = new_vals
        viol = max(viol, v_)
        steps += s_
    wall = time.perf_counter() - t0
    if not (np.all(np.isfinite(state.xv)) and np.all(np.isfinite(state.fv))):
        raise SolverError(f"non-finite value in state after pass {pass_index}")
    primal = core.primal_objective(instance, state)
    dual = core.dual_objective_from_state(instance, state, duals)
    return PassStats(pass_index=pass_index,
                     primal_objective=primal,
                     dual_objective=dual,
                     duality_gap=primal - dual,
                     max_violation=viol,
                     wall_time=wall,
                     steps=steps)


def _is_converged(stats, config):
    rel_gap = stats.duality_gap / max(1.0, abs(stats.dual_objective))
    return rel_gap <= config.tol_gap and stats.max_violation <= config.tol_violation


def solve(instance, config=None, stats_stream=None):
    """Repeat passes until the relative duality gap and the maximum
    violation are within tolerance, or the pass budget runs out.  With
    fixed_passes set, runs exactly that many passes (benchmark mode)."""
    if config is None:
        config = SolverConfig()
    config.validate()
    if config.epsilon is not None and config.epsilon != instance.epsilon:
        instance = core.ProblemInstance(instance.n, instance.D, instance.Wt,
                                        epsilon=config.epsilon,
                                        reg_x=instance.reg_x,
                                        reg_f=instance.reg_f)
    plan = Plan(instance.n, config)
    state, duals = initialize(instance, config.workers)
    budget = config.fixed_passes if config.fixed_passes is not None else config.max_passes
    stats = []
    total_steps = 0
    converged = False
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for k in range(budget):
            st = run_pass(state, duals, instance, plan, pool=pool, pass_index=k)
            stats.append(st)
            total_steps += st.steps
            if stats_stream is not None:
                stats_stream.write(st.to_json() + "\n")
            if config.fixed_passes is None and _is_converged(st, config):
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=False)
    if config.fixed_passes is not None and stats:
        converged = _is_converged(stats[-1], config)
    return Solution(state=state, stats=stats, converged=converged,
                    passes_run=len(stats), total_steps=total_steps, duals=duals)


def kkt_report(instance, state, duals):
    """Fixed-point audit after a completed pass.

    Checks the Dykstra state relation c + A^T y = -eps W v (relative,
    infinity norm), positivity of stored duals, the exact maximum
    violation, and the complementary-slackness residual
    max_i y_i * max(b_i - a_i^T v, 0).
    """
    g = core.accumulate_aty(instance, duals)
    wv = np.concatenate([instance.reg_x * state.xv, instance.reg_f * state.fv])
    target = -instance.epsilon * wv
    scale = max(1.0, float(np.max(np.abs(target))))
    state_residual = float(np.max(np.abs(g - target))) / scale
    v = state.v()
    comp = 0.0
    min_y = np.inf
    for key, y in duals.items():
        min_y = min(min_y, y)
        av = sum(c * v[p] for p, c in core._row_entries(key, instance.n))
        comp = max(comp, y * max(instance.rhs(key) - av, 0.0))
    return {
        "state_relation_residual": state_residual,
        "min_stored_dual": float(min_y) if np.isfinite(min_y) else None,
        "max_violation": core.max_violation(instance, state),
        "complementary_slackness": comp,
    }
