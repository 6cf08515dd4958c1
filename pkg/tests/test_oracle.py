import numpy as np
import pytest
from hypothesis import given, strategies as st

from imbalance import InvalidParameter, ModelParams, build_kernel, classify, invariant_measure
from imbalance.measure import DegenerateChain
from imbalance.oracle import BirthDeathMatrix, build_chain, stationary_solve


def test_dense_matrix_is_stochastic():
    k = build_kernel(ModelParams(N=16, d=1, alpha=2.0, gamma=-0.5, q=0.8))
    c = classify(k)
    branch = {lvl: 1 for lvl in c.a2_levels}
    if c.a3_levels:
        pytest.skip("oscillating levels")
    T = build_chain(k, c, branch).dense()
    np.testing.assert_allclose(T.sum(axis=1), 1.0, atol=1e-14)
    assert np.all(T >= -1e-15)


def test_build_chain_rejects_oscillation():
    k = build_kernel(ModelParams(N=128, d=2, alpha=5.0, gamma=-0.9, q=0.3))
    c = classify(k)
    assert c.a3_levels
    with pytest.raises(InvalidParameter):
        build_chain(k, c)


def test_symmetric_random_walk_by_hand():
    # up = down = 1/2 inside, ends pushed back with certainty: pi is proportional to (1, 2, 2, 2, 1)
    up = np.array([1.0, 0.5, 0.5, 0.5, 0.0])
    down = np.array([0.0, 0.5, 0.5, 0.5, 1.0])
    sol = stationary_solve(BirthDeathMatrix(up, down))
    np.testing.assert_allclose(sol.pi, np.array([1, 2, 2, 2, 1]) / 8, atol=1e-15)
    assert not sol.reducible


def test_reducible_chain_reports_classes():
    # level 2 cannot be left downward and level 1 cannot go up: {0,1} and {2,3} are closed
    up = np.array([0.3, 0.0, 0.4, 0.0])
    down = np.array([0.0, 0.2, 0.0, 0.5])
    sol = stationary_solve(BirthDeathMatrix(up, down))
    assert sol.pi is None
    assert sol.recurrent_classes == [(0, 1), (2, 3)]


def test_transient_levels_get_zero_mass():
    # level 0 drains into 1 and never returns
    up = np.array([0.5, 0.3, 0.0])
    down = np.array([0.0, 0.0, 0.4])
    sol = stationary_solve(BirthDeathMatrix(up, down))
    assert sol.transient == [0]
    assert sol.pi[0] == 0
    np.testing.assert_allclose(sol.pi[1:], [0.4 / 0.7, 0.3 / 0.7], atol=1e-14)


def test_dense_solve_cap():
    n = 10
    with pytest.raises(InvalidParameter):
        stationary_solve(BirthDeathMatrix(np.full(n, 0.1), np.full(n, 0.1)), max_levels=5)


@given(st.sampled_from([4, 8, 16, 32]), st.floats(0.2, 1.0), st.floats(0.5, 8),
       st.floats(-1.0, -0.05))
def test_product_form_matches_dense_solve(N, q, alpha, gamma):
    k = build_kernel(ModelParams(N=N, d=1, alpha=alpha, gamma=gamma, q=q))
    c = classify(k)
    if c.a3_levels:
        return
    branch = {lvl: (1 if lvl % 2 else -1) for lvl in c.a2_levels}
    chain = build_chain(k, c, branch)
    sol = stationary_solve(chain)
    try:
        pi = invariant_measure(k, c, branch).pi
    except DegenerateChain:
        assert sol.reducible or sol.pi is not None
        return
    assert sol.pi is not None
    np.testing.assert_allclose(pi, sol.pi, atol=1e-10)
