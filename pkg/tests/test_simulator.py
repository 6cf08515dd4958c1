import numpy as np
import pytest

from imbalance import ModelParams, all_branches, build_kernel, classify, InvalidParameter
from imbalance.simulator import SimConfig, initial_state, run, step


def _cfg(**kw):
    base = dict(params=ModelParams(N=16, d=1, alpha=2.0, gamma=-0.6, q=0.9), epochs=500,
                seed=3, record={"hist", "path", "wealth", "eta2"})
    base.update(kw)
    return SimConfig(**base)


def test_same_seed_same_run():
    a, b = run(_cfg()), run(_cfg())
    assert np.array_equal(a.histogram, b.histogram)
    assert np.array_equal(a.path, b.path)
    c = run(_cfg(seed=4))
    assert not np.array_equal(a.path, c.path)


@pytest.mark.parametrize("params", [
    ModelParams(N=16, d=1, alpha=2.0, gamma=-0.6, q=0.9),
    ModelParams(N=21, d=2, alpha=5.0, gamma=-0.9, q=0.3),
    ModelParams(N=12, d=1, alpha=1.5, gamma=-0.4, q=0.7, beta=1.3),
])
def test_step_reproduces_run_bit_for_bit(params):
    cfg = _cfg(params=params, epochs=300)
    traj = run(cfg)
    s = initial_state(cfg)
    for _ in range(cfg.epochs):
        s = step(s, cfg)
    fin = traj.final_state
    assert s.n_plus == fin.n_plus
    assert np.array_equal(s.eta1, fin.eta1) and np.array_equal(s.eta2, fin.eta2)
    assert s.price == fin.price
    assert s.aggregate_wealth == fin.aggregate_wealth
    assert np.array_equal(s.wealth, fin.wealth)


def test_step_leaves_input_untouched_and_tracks_wealth():
    cfg = _cfg()
    s0 = initial_state(cfg)
    snapshot = s0.copy()
    s = s0
    for _ in range(200):
        prev = s
        s = step(prev, cfg)
        assert abs(s.n_plus - prev.n_plus) <= 1
        if s.n_plus == prev.n_plus:
            assert s.price == prev.price and np.array_equal(s.wealth, prev.wealth)
    assert np.array_equal(s0.eta1, snapshot.eta1) and s0.price == snapshot.price
    assert s.aggregate_wealth == pytest.approx(s.wealth.sum(), rel=1e-12, abs=1e-12)


def test_invalid_configs():
    p = ModelParams(N=16, d=1, alpha=2.0)
    with pytest.raises(InvalidParameter):
        SimConfig(params=p, epochs=0)
    with pytest.raises(InvalidParameter):
        SimConfig(params=p, epochs=10, record={"bogus"})
    with pytest.raises(InvalidParameter):
        initial_state(SimConfig(params=p, epochs=10, initial_eta2=np.ones(16)))


def test_histogram_matches_exact_measure():
    p = ModelParams(N=8, d=1, alpha=3.0, gamma=-0.5, q=1.0)
    k = build_kernel(p)
    exact = all_branches(k, classify(k))[0].pi
    traj = run(SimConfig(params=p, epochs=400_000, seed=11))
    assert traj.histogram.sum() == 400_000
    assert 0.5 * np.abs(traj.occupation - exact).sum() < 0.01


def test_eta2_trace_follows_classes():
    p = ModelParams(N=64, d=2, alpha=5.0, gamma=-0.9, q=0.3)
    c = classify(build_kernel(p))
    traj = run(SimConfig(params=p, epochs=50, seed=1, record={"hist", "eta2"}))
    tr = traj.eta2_trace
    assert tr.shape == (51, 65)
    for lvl, a in enumerate(c.a_class):
        if a == 1:
            assert np.all(tr[1:, lvl] == 1)
        elif a == 4:
            assert np.all(tr[1:, lvl] == -1)
        elif a == 2:
            assert np.all(tr[:, lvl] == tr[0, lvl])
        else:
            assert np.all(tr[1:, lvl] == -tr[:-1, lvl])


def test_wealth_untracked_is_nan():
    traj = run(_cfg(record={"hist"}))
    assert np.all(np.isnan(traj.final_state.wealth))
    assert traj.summary()["epochs"] == 500


def test_absorbing_ends_trap_the_walk():
    # at alpha = 2 the field ties at both full-consensus levels, so neither end can be left
    p = ModelParams(N=8, d=1, alpha=2.0, gamma=-0.5, q=1.0)
    traj = run(SimConfig(params=p, epochs=20_000, seed=11))
    end = traj.final_state.n_plus
    assert end in (0, 8)
    assert traj.histogram[end] > 19_000
