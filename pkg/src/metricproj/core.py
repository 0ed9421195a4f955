"""Problem data, primal/dual state, and convergence metrics.

The quadratic program being solved is

    min  c^T v + (eps/2) v^T W v   s.t.  A v <= b

where v = [x-block; f-block] stacks the distance variables x_ij and the
slack variables f_ij for all pairs i < j.  Each block is the lower
triangle of a symmetric n x n matrix linearized column-major, which for
the (i, j) pair with i < j is the same as row-major order on the upper
triangle (i outer, j inner).  c is zero on the x-block and carries the
pair weights w_ij on the f-block.
"""

import json
import math
from dataclasses import dataclass, asdict
from enum import IntEnum

import numpy as np

from . import _kernels


class Kind(IntEnum):
    METRIC_IJ = 0   # x_ij <= x_ik + x_jk
    METRIC_IK = 1   # x_ik <= x_ij + x_jk
    METRIC_JK = 2   # x_jk <= x_ij + x_ik
    PAIR_UPPER = 3  # x_ij - f_ij <= d_ij
    PAIR_LOWER = 4  # -x_ij - f_ij <= -d_ij


METRIC_KINDS = (Kind.METRIC_IJ, Kind.METRIC_IK, Kind.METRIC_JK)


def pair_count(n):
    return n * (n - 1) // 2


def pair_index(n, i, j):
    """Flat position of pair (i, j), 0-based, i < j."""
    if not 0 <= i < j < n:
        raise ValueError(f"bad pair ({i}, {j}) for n={n}")
    return i * (n - 1) - i * (i - 1) // 2 + (j - i - 1)


def constraint_count(n, metric_only=False):
    """Total number of constraint rows: 3*C(n,3) metric plus 2*C(n,2) pair."""
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    metric = 3 * (n * (n - 1) * (n - 2) // 6)
    if metric_only:
        return metric
    return metric + 2 * pair_count(n)


@dataclass(frozen=True)
class ConstraintKey:
    """Identifies one row of the constraint matrix A.

    Metric kinds carry a triplet (i, j, k) with i < j < k; pair kinds
    carry (i, j) with i < j and k = -1.  All indices 0-based.
    """
    kind: Kind
    i: int
    j: int
    k: int = -1

    def __post_init__(self):
        if self.kind in METRIC_KINDS:
            if not self.i < self.j < self.k:
                raise ValueError(f"metric key needs i < j < k, got {self}")
        else:
            if not self.i < self.j or self.k != -1:
                raise ValueError(f"pair key needs i < j and no k, got {self}")

    @property
    def is_metric(self):
        return self.kind in METRIC_KINDS

    def encode(self, n):
        """Pack a metric key into one int64 (worker dual-array storage)."""
        if not self.is_metric:
            raise ValueError("only metric keys are encoded")
        return (((self.i * n) + self.j) * n + self.k) * 3 + int(self.kind)

    @staticmethod
    def decode(code, n):
        kind = Kind(code % 3)
        t = code // 3
        k = t % n
        j = (t // n) % n
        i = t // (n * n)
        return ConstraintKey(kind, i, j, k)


class ProblemInstance:
    """Defines the regularized QP: dissimilarities D, weights Wt, eps.

    Optional reg_x / reg_f give the diagonal of the regularization
    matrix W per x- and f-variable (default identity).
    """

    def __init__(self, n, D, Wt, epsilon=0.2, reg_x=None, reg_f=None):
        D = np.asarray(D, dtype=np.float64)
        Wt = np.asarray(Wt, dtype=np.float64)
        if n < 3:
            raise ValueError(f"need n >= 3, got {n}")
        if D.shape != (n, n) or Wt.shape != (n, n):
            raise ValueError("D and Wt must be n x n")
        if not np.allclose(D, D.T):
            raise ValueError("D must be symmetric")
        if not np.allclose(Wt, Wt.T):
            raise ValueError("Wt must be symmetric")
        if np.any(D < 0):
            raise ValueError("dissimilarities must be nonnegative")
        iu = np.triu_indices(n, 1)
        if np.any(Wt[iu] <= 0):
            raise ValueError("off-diagonal weights must be positive")
        if np.any(np.diag(D) != 0):
            raise ValueError("D must have zero diagonal")
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.n = n
        self.D = D
        self.Wt = Wt
        self.epsilon = float(epsilon)
        m = pair_count(n)
        self.d_flat = D[iu].copy()
        self.w_flat = Wt[iu].copy()
        if reg_x is None:
            reg_x = np.ones(m)
        if reg_f is None:
            reg_f = np.ones(m)
        self.reg_x = np.asarray(reg_x, dtype=np.float64)
        self.reg_f = np.asarray(reg_f, dtype=np.float64)
        if self.reg_x.shape != (m,) or self.reg_f.shape != (m,):
            raise ValueError("reg_x / reg_f must have one entry per pair")
        if np.any(self.reg_x <= 0) or np.any(self.reg_f <= 0):
            raise ValueError("regularization weights must be positive")

    @property
    def npairs(self):
        return pair_count(self.n)

    @property
    def nvars(self):
        return 2 * self.npairs

    def c_vector(self):
        """Linear objective: zero on x-variables, w_ij on f-variables."""
        return np.concatenate([np.zeros(self.npairs), self.w_flat])

    def rhs(self, key):
        """b entry for one constraint row."""
        if key.is_metric:
            return 0.0
        d = self.d_flat[pair_index(self.n, key.i, key.j)]
        return d if key.kind == Kind.PAIR_UPPER else -d


class PrimalState:
    """Distance matrix X and slack matrix F, one triangle stored.

    Accessors normalize the orientation, so read/write through (i, j)
    and (j, i) hit the same storage cell.  Not thread-safe by itself;
    concurrent mutation is only valid under a conflict-free schedule.
    """

    def __init__(self, n, xv=None, fv=None):
        m = pair_count(n)
        self.n = n
        self.xv = np.zeros(m) if xv is None else np.asarray(xv, dtype=np.float64)
        self.fv = np.zeros(m) if fv is None else np.asarray(fv, dtype=np.float64)
        if self.xv.shape != (m,) or self.fv.shape != (m,):
            raise ValueError("state vectors must have one entry per pair")

    def _pos(self, i, j):
        if i == j:
            raise ValueError("diagonal entries are fixed at zero")
        if i > j:
            i, j = j, i
        return pair_index(self.n, i, j)

    def get_x(self, i, j):
        return 0.0 if i == j else self.xv[self._pos(i, j)]

    def set_x(self, i, j, val):
        self.xv[self._pos(i, j)] = val

    def get_f(self, i, j):
        return self.fv[self._pos(i, j)]

    def set_f(self, i, j, val):
        self.fv[self._pos(i, j)] = val

    def X(self):
        """Dense symmetric copy of the distance matrix."""
        M = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n, 1)
        M[iu] = self.xv
        return M + M.T

    def F(self):
        M = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n, 1)
        M[iu] = self.fv
        return M + M.T

    def v(self):
        """The stacked variable vector [x-block; f-block]."""
        return np.concatenate([self.xv, self.fv])

    def copy(self):
        return PrimalState(self.n, self.xv.copy(), self.fv.copy())


class DualStore:
    """Sparse dual storage: one (key, y) array per worker plus a cursor.

    Worker arrays hold only strictly positive duals, in the owning
    worker's constraint visit order, so each pass reads them with a
    single forward cursor in O(1) per constraint.  Pair-constraint
    duals live in a dense (npairs, 2) array, column 0 the upper and
    column 1 the lower constraint, partitioned across workers by pair
    index.
    """

    def __init__(self, n, nworkers):
        self.n = n
        self.nworkers = nworkers
        self.keys = [np.empty(0, dtype=np.int64) for _ in range(nworkers)]
        self.vals = [np.empty(0, dtype=np.float64) for _ in range(nworkers)]
        self.cursors = np.zeros(nworkers, dtype=np.int64)
        self.pair_duals = np.zeros((pair_count(n), 2))

    def reset_cursors(self):
        self.cursors[:] = 0

    def nnz(self):
        return sum(len(k) for k in self.keys)

    def items(self):
        """Yield (ConstraintKey, y) for every stored dual, metric then pair."""
        for w in range(self.nworkers):
            for code, y in zip(self.keys[w], self.vals[w]):
                yield ConstraintKey.decode(int(code), self.n), float(y)
        idx = 0
        for i in range(self.n):
            for j in range(i + 1, self.n):
                yu, yl = self.pair_duals[idx]
                if yu != 0.0:
                    yield ConstraintKey(Kind.PAIR_UPPER, i, j), float(yu)
                if yl != 0.0:
                    yield ConstraintKey(Kind.PAIR_LOWER, i, j), float(yl)
                idx += 1


@dataclass
class PassStats:
    pass_index: int
    primal_objective: float
    dual_objective: float
    duality_gap: float
    max_violation: float
    wall_time: float
    steps: int = 0  # dykstra_step invocations; bookkeeping, not part of the stats format

    def to_json(self):
        fields = asdict(self)
        fields.pop("steps")
        return json.dumps(fields)


def primal_objective(instance, state):
    """sum_{i<j} w_ij f_ij + (eps/2) (x^T Wx x + f^T Wf f)."""
    if state.n != instance.n:
        raise ValueError("state dimensions do not match instance")
    lin = float(np.dot(instance.w_flat, state.fv))
    quad = float(np.dot(instance.reg_x * state.xv, state.xv)
                 + np.dot(instance.reg_f * state.fv, state.fv))
    return lin + 0.5 * instance.epsilon * quad


def accumulate_aty(instance, duals):
    """c + A^T y, accumulated sparsely from the stored nonzero duals."""
    n = instance.n
    m = instance.npairs
    g = instance.c_vector()
    for key, y in duals.items():
        for pos, coef in _row_entries(key, n):
            g[pos] += coef * y
    return g


def _row_entries(key, n):
    """(variable position, coefficient) pairs of one constraint row."""
    if key.is_metric:
        pij = pair_index(n, key.i, key.j)
        pik = pair_index(n, key.i, key.k)
        pjk = pair_index(n, key.j, key.k)
        if key.kind == Kind.METRIC_IJ:
            return ((pij, 1.0), (pik, -1.0), (pjk, -1.0))
        if key.kind == Kind.METRIC_IK:
            return ((pik, 1.0), (pij, -1.0), (pjk, -1.0))
        return ((pjk, 1.0), (pij, -1.0), (pik, -1.0))
    m = pair_count(n)
    p = pair_index(n, key.i, key.j)
    if key.kind == Kind.PAIR_UPPER:
        return ((p, 1.0), (m + p, -1.0))
    return ((p, -1.0), (m + p, -1.0))


def b_dot_y(instance, duals):
    """sum_i b_i y_i; metric rows have b = 0, pair rows b = +/- d_ij."""
    return float(np.dot(instance.d_flat,
                        duals.pair_duals[:, 0] - duals.pair_duals[:, 1]))


def dual_objective(instance, duals):
    """Lagrangian dual value -b^T y - (1/(2 eps)) (c + A^T y)^T W^-1 (c + A^T y)."""
    if duals.n != instance.n:
        raise ValueError("dual store does not match instance")
    g = accumulate_aty(instance, duals)
    winv = np.concatenate([1.0 / instance.reg_x, 1.0 / instance.reg_f])
    quad = float(np.dot(g * winv, g))
    return -b_dot_y(instance, duals) - quad / (2.0 * instance.epsilon)


def dual_objective_from_state(instance, state, duals):
    """Dual value via the Dykstra invariant v = -(1/eps) W^-1 (c + A^T y).

    Equals dual_objective whenever the invariant holds (it does after
    every completed pass), but costs O(n^2) instead of a sweep over
    stored duals.
    """
    quad = float(np.dot(instance.reg_x * state.xv, state.xv)
                 + np.dot(instance.reg_f * state.fv, state.fv))
    return -b_dot_y(instance, duals) - 0.5 * instance.epsilon * quad


def max_violation(instance, state):
    """max over all metric and pair constraints of a^T v - b, clamped at 0."""
    return float(_kernels.max_violation(state.xv, state.fv, instance.d_flat,
                                        instance.n))


def duality_gap(instance, state, duals):
    return primal_objective(instance, state) - dual_objective_from_state(
        instance, state, duals)


def write_solution(state, path):
    """Text dump: header "n <n>", then "i j x_ij f_ij" per pair, 1-indexed."""
    with open(path, "w") as fh:
        fh.write(f"n {state.n}\n")
        idx = 0
        for i in range(state.n):
            for j in range(i + 1, state.n):
                fh.write(f"{i + 1} {j + 1} {state.xv[idx]:.15g} {state.fv[idx]:.15g}\n")
                idx += 1


def read_solution(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "n":
            raise ValueError(f"{path}: bad solution header")
        n = int(header[1])
        state = PrimalState(n)
        count = 0
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            state.set_x(i, j, float(parts[2]))
            state.set_f(i, j, float(parts[3]))
            count += 1
        if count != pair_count(n):
            raise ValueError(f"{path}: expected {pair_count(n)} rows, found {count}")
    return state


def write_stats(stats, path):
    """One JSON object per pass, one per line."""
    with open(path, "w") as fh:
        for s in stats:
            fh.write(s.to_json() + "\n")
