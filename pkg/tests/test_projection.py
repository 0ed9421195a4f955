import itertools

import numpy as np
import pytest

import reference as ref
from metricproj import core, projection
from metricproj.core import ConstraintKey, Kind, PrimalState


def unit_instance(n):
    return core.ProblemInstance(n, np.zeros((n, n)), np.ones((n, n)) - np.eye(n),
                                epsilon=0.3)


def test_metric_row_entries():
    n = 5
    key = ConstraintKey(Kind.METRIC_JK, 0, 2, 4)
    positions, coeffs, b = projection.metric_row(key, n)
    pjk = core.pair_index(n, 2, 4)
    assert b == 0.0
    assert dict(zip(positions, coeffs))[pjk] == 1.0
    assert sorted(coeffs) == [-1.0, -1.0, 1.0]
    with pytest.raises(ValueError):
        projection.metric_row(ConstraintKey(Kind.PAIR_UPPER, 0, 2), n)


def test_pair_row_entries(small_instance):
    inst = small_instance
    key = ConstraintKey(Kind.PAIR_LOWER, 1, 4)
    positions, coeffs, b = projection.pair_row(key, inst)
    p = core.pair_index(inst.n, 1, 4)
    assert positions == (p, inst.npairs + p)
    assert coeffs == (-1.0, -1.0)
    assert b == -inst.D[1, 4]
    with pytest.raises(ValueError):
        projection.pair_row(ConstraintKey(Kind.METRIC_IJ, 0, 1, 2), inst)


def test_violated_triangle_projection_worked_example():
    """x_ij = 1, x_ik = x_jk = 0 violates x_ij <= x_ik + x_jk by 1; the
    projection moves it to (2/3, 1/3, 1/3) with dual eps * 1/3."""
    inst = unit_instance(3)
    state = PrimalState(3)
    state.set_x(0, 1, 1.0)
    out = projection.dykstra_step(state, ConstraintKey(Kind.METRIC_IJ, 0, 1, 2),
                                  0.0, inst)
    assert out.changed
    assert abs(state.get_x(0, 1) - 2.0 / 3.0) <= 1e-15
    assert abs(state.get_x(0, 2) - 1.0 / 3.0) <= 1e-15
    assert abs(state.get_x(1, 2) - 1.0 / 3.0) <= 1e-15
    assert abs(out.theta_plus - inst.epsilon / 3.0) <= 1e-15


def test_satisfied_constraint_with_zero_dual_is_noop():
    inst = unit_instance(4)
    state = PrimalState(4)
    state.set_x(0, 1, 1.0)
    state.set_x(0, 2, 1.0)
    state.set_x(1, 2, 1.0)
    before = state.v().copy()
    out = projection.dykstra_step(state, ConstraintKey(Kind.METRIC_IJ, 0, 1, 2),
                                  0.0, inst)
    assert not out.changed and out.theta_plus == 0.0
    assert np.array_equal(state.v(), before)


def test_nonzero_dual_applies_correction_first():
    """With y_old > 0 the step must undo the previous projection before
    re-projecting; on a satisfied constraint that moves v backwards."""
    inst = unit_instance(3)
    state = PrimalState(3)
    state.set_x(0, 1, -1.0)  # slack of 1 on x_01 <= x_02 + x_12
    y_old = 0.06
    out = projection.dykstra_step(state, ConstraintKey(Kind.METRIC_IJ, 0, 1, 2),
                                  y_old, inst)
    # corrected point is still feasible, so theta_plus = 0 and the move
    # is exactly + (y_old/eps) * W^-1 a
    assert out.theta_plus == 0.0
    shift = y_old / inst.epsilon
    assert state.get_x(0, 1) == pytest.approx(-1.0 + shift, abs=1e-15)
    assert state.get_x(0, 2) == pytest.approx(-shift, abs=1e-15)


def test_rejects_negative_dual(small_instance):
    state = PrimalState(small_instance.n)
    with pytest.raises(ValueError):
        projection.dykstra_step(state, ConstraintKey(Kind.METRIC_IJ, 0, 1, 2),
                                -0.5, small_instance)


def all_keys(n):
    for (i, j, k) in itertools.combinations(range(n), 3):
        for kind in core.METRIC_KINDS:
            yield ConstraintKey(kind, i, j, k)
    for i in range(n):
        for j in range(i + 1, n):
            yield ConstraintKey(Kind.PAIR_UPPER, i, j)
            yield ConstraintKey(Kind.PAIR_LOWER, i, j)


def test_step_matches_dense_two_step_update():
    """The fused sparse step equals the literal dense correction +
    projection for every constraint kind, with non-identity W."""
    rng = np.random.default_rng(42)
    inst = ref.random_instance(5, seed=5)
    inst.reg_x = rng.uniform(0.5, 2.0, inst.npairs)
    inst.reg_f = rng.uniform(0.5, 2.0, inst.npairs)
    rows = {}
    for key in all_keys(5):
        positions, coeffs, b = projection.constraint_row(key, inst)
        a = np.zeros(inst.nvars)
        for p, c in zip(positions, coeffs):
            a[p] = c
        rows[key] = (a, b)
    wdiag = np.concatenate([inst.reg_x, inst.reg_f])
    winv = 1.0 / wdiag
    eps = inst.epsilon
    for key, (a, b) in rows.items():
        v0 = rng.normal(size=inst.nvars)
        y_old = float(rng.uniform(0.0, 0.5))
        # dense: correction then projection
        v1 = v0 + y_old * (1.0 / eps) * winv * a
        theta = eps * max(a @ v1 - b, 0.0) / (a @ (winv * a))
        v2 = v1 - theta * (1.0 / eps) * winv * a
        state = PrimalState(inst.n, v0[:inst.npairs].copy(),
                            v0[inst.npairs:].copy())
        out = projection.dykstra_step(state, key, y_old, inst)
        assert np.allclose(state.v(), v2, atol=1e-13), key
        expected = 0.0 if theta <= projection.THETA_FLOOR else theta
        assert out.theta_plus == pytest.approx(expected, abs=1e-13)


def test_kernel_serial_pass_matches_python_steps():
    """One compiled serial pass equals the pure-Python step applied in
    lexicographic order with per-constraint dual bookkeeping."""
    from metricproj import _kernels

    inst = ref.random_instance(7, seed=9)
    state_py = PrimalState(inst.n)
    state_py.fv[:] = -inst.w_flat / inst.epsilon
    duals = {}
    for _ in range(2):
        for (i, j, k) in itertools.combinations(range(inst.n), 3):
            for kind in core.METRIC_KINDS:
                key = ConstraintKey(kind, i, j, k)
                out = projection.dykstra_step(state_py, key,
                                              duals.get(key, 0.0), inst)
                if out.theta_plus > 0:
                    duals[key] = out.theta_plus
                else:
                    duals.pop(key, None)

    state_k = PrimalState(inst.n)
    state_k.fv[:] = -inst.w_flat / inst.epsilon
    winvx = 1.0 / inst.reg_x
    cap = core.constraint_count(inst.n, metric_only=True)
    rkeys = np.empty(0, dtype=np.int64)
    rvals = np.empty(0)
    for _ in range(2):
        wkeys = np.empty(cap, dtype=np.int64)
        wvals = np.empty(cap)
        cnt, _, _, steps = _kernels.serial_metric_pass(
            state_k.xv, inst.n, inst.epsilon, winvx, rkeys, rvals, 0,
            wkeys, wvals)
        rkeys, rvals = wkeys[:cnt].copy(), wvals[:cnt].copy()
        assert steps == cap

    assert np.allclose(state_k.xv, state_py.xv, atol=1e-13)
    stored = {ConstraintKey.decode(int(c), inst.n): y
              for c, y in zip(rkeys, rvals)}
    assert stored.keys() == duals.keys()
    for key in duals:
        assert stored[key] == pytest.approx(duals[key], rel=1e-12)
