import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

import reference as ref
from metricproj import core, solver
from metricproj.core import ConstraintKey, Kind, ProblemInstance, PrimalState


def test_pair_index_matches_triu_order():
    for n in (3, 5, 9):
        iu = np.triu_indices(n, 1)
        for pos, (i, j) in enumerate(zip(*iu)):
            assert core.pair_index(n, int(i), int(j)) == pos


def test_pair_index_rejects_bad_pairs():
    with pytest.raises(ValueError):
        core.pair_index(5, 3, 3)
    with pytest.raises(ValueError):
        core.pair_index(5, 4, 2)
    with pytest.raises(ValueError):
        core.pair_index(5, 0, 5)


def test_constraint_count_small():
    for n in range(3, 12):
        triples = len(list(itertools.combinations(range(n), 3)))
        pairs = n * (n - 1) // 2
        assert core.constraint_count(n, metric_only=True) == 3 * triples
        assert core.constraint_count(n) == 3 * triples + 2 * pairs
    with pytest.raises(ValueError):
        core.constraint_count(2)


@given(st.integers(4, 200), st.data())
def test_constraint_key_roundtrip(n, data):
    i = data.draw(st.integers(0, n - 3))
    j = data.draw(st.integers(i + 1, n - 2))
    k = data.draw(st.integers(j + 1, n - 1))
    kind = data.draw(st.sampled_from(core.METRIC_KINDS))
    key = ConstraintKey(kind, i, j, k)
    assert ConstraintKey.decode(key.encode(n), n) == key


def test_constraint_key_validation():
    with pytest.raises(ValueError):
        ConstraintKey(Kind.METRIC_IJ, 2, 1, 3)
    with pytest.raises(ValueError):
        ConstraintKey(Kind.PAIR_UPPER, 1, 2, 3)
    with pytest.raises(ValueError):
        ConstraintKey(Kind.PAIR_LOWER, 2, 2)
    assert not ConstraintKey(Kind.PAIR_UPPER, 0, 4).is_metric


def test_instance_validation():
    n = 4
    D = np.zeros((n, n))
    Wt = np.ones((n, n))
    ProblemInstance(n, D, Wt)
    with pytest.raises(ValueError):
        ProblemInstance(2, np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        ProblemInstance(n, D[:3, :3], Wt)
    bad = D.copy()
    bad[0, 1] = 1.0  # asymmetric
    with pytest.raises(ValueError):
        ProblemInstance(n, bad, Wt)
    with pytest.raises(ValueError):
        ProblemInstance(n, D - 1.0, Wt)
    with pytest.raises(ValueError):
        ProblemInstance(n, D, Wt * 0.0)
    with pytest.raises(ValueError):
        ProblemInstance(n, D, Wt, epsilon=0.0)
    with pytest.raises(ValueError):
        ProblemInstance(n, D, Wt, reg_x=np.zeros(6))


def test_instance_flat_views(small_instance):
    inst = small_instance
    iu = np.triu_indices(inst.n, 1)
    assert np.array_equal(inst.d_flat, inst.D[iu])
    assert np.array_equal(inst.w_flat, inst.Wt[iu])
    c = inst.c_vector()
    assert np.all(c[:inst.npairs] == 0)
    assert np.array_equal(c[inst.npairs:], inst.w_flat)
    up = ConstraintKey(Kind.PAIR_UPPER, 1, 3)
    lo = ConstraintKey(Kind.PAIR_LOWER, 1, 3)
    d = inst.D[1, 3]
    assert inst.rhs(up) == d and inst.rhs(lo) == -d
    assert inst.rhs(ConstraintKey(Kind.METRIC_IJ, 0, 1, 2)) == 0.0


def test_primal_state_orientation():
    st_ = PrimalState(5)
    st_.set_x(3, 1, 2.5)
    assert st_.get_x(1, 3) == 2.5
    assert st_.get_x(2, 2) == 0.0
    st_.set_f(0, 4, -1.0)
    assert st_.get_f(4, 0) == -1.0
    X = st_.X()
    assert np.array_equal(X, X.T) and X[1, 3] == 2.5 and np.all(np.diag(X) == 0)
    v = st_.v()
    assert v.shape == (20,)
    cp = st_.copy()
    cp.set_x(1, 3, 0.0)
    assert st_.get_x(1, 3) == 2.5
    with pytest.raises(ValueError):
        st_.set_x(2, 2, 1.0)


def test_objectives_match_dense_formulas(small_instance):
    inst = small_instance
    rng = np.random.default_rng(0)
    state = PrimalState(inst.n, rng.normal(size=inst.npairs),
                        rng.normal(size=inst.npairs))
    c, wdiag = ref.qp_vectors(inst)
    v = state.v()
    expect = c @ v + 0.5 * inst.epsilon * v @ (wdiag * v)
    assert core.primal_objective(inst, state) == pytest.approx(expect, rel=1e-12)


def test_max_violation_matches_brute_force(small_instance):
    inst = small_instance
    rng = np.random.default_rng(7)
    state = PrimalState(inst.n, rng.normal(size=inst.npairs),
                        rng.normal(size=inst.npairs))
    assert core.max_violation(inst, state) == pytest.approx(
        ref.brute_max_violation(inst, state), abs=1e-12)


def test_dual_objective_consistency_after_passes(small_instance):
    """Sparse accumulation and the state-relation shortcut agree once a
    pass has established v = -(1/eps) W^-1 (c + A^T y)."""
    inst = small_instance
    cfg = solver.SolverConfig(workers=2, tile_size=2, fixed_passes=4)
    sol = solver.solve(inst, cfg)
    a = core.dual_objective(inst, sol.duals)
    b = core.dual_objective_from_state(inst, sol.state, sol.duals)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)
    assert core.duality_gap(inst, sol.state, sol.duals) == pytest.approx(
        core.primal_objective(inst, sol.state) - a, rel=1e-12, abs=1e-12)


def test_dual_store_items_roundtrip(small_instance):
    inst = small_instance
    sol = solver.solve(inst, solver.SolverConfig(fixed_passes=3))
    duals = sol.duals
    seen = dict(duals.items())
    assert len(seen) == duals.nnz() + np.count_nonzero(duals.pair_duals)
    for key, y in seen.items():
        assert y > 0.0
        if key.is_metric:
            assert key.i < key.j < key.k


def test_pass_stats_json_excludes_steps():
    s = core.PassStats(pass_index=1, primal_objective=2.0, dual_objective=1.0,
                       duality_gap=1.0, max_violation=0.1, wall_time=0.5,
                       steps=99)
    payload = json.loads(s.to_json())
    assert "steps" not in payload
    assert payload["pass_index"] == 1 and payload["duality_gap"] == 1.0


def test_solution_file_roundtrip(tmp_path, small_instance):
    inst = small_instance
    sol = solver.solve(inst, solver.SolverConfig(fixed_passes=2))
    path = tmp_path / "sol.txt"
    core.write_solution(sol.state, str(path))
    first = path.read_text().splitlines()[0]
    assert first == f"n {inst.n}"
    back = core.read_solution(str(path))
    assert np.allclose(back.xv, sol.state.xv, atol=1e-14)
    assert np.allclose(back.fv, sol.state.fv, atol=1e-14)


def test_read_solution_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("m 4\n")
    with pytest.raises(ValueError):
        core.read_solution(str(p))
    p.write_text("n 4\n1 2 0.0 0.0\n")
    with pytest.raises(ValueError):
        core.read_solution(str(p))


def test_write_stats(tmp_path, small_instance):
    sol = solver.solve(small_instance, solver.SolverConfig(fixed_passes=3))
    path = tmp_path / "stats.jsonl"
    core.write_stats(sol.stats, str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert [json.loads(l)["pass_index"] for l in lines] == [0, 1, 2]
