import numpy as np
import pytest
from hypothesis import given, strategies as st

from imbalance import (AClass, Frozen, InvalidParameter, ModelParams, OSCILLATING,
                       build_kernel, classify, eta2_steady, lambda_finite_beta)
from imbalance.attractors import _field_atoms, lambda_stay_table


def _cls(**kw):
    base = dict(N=128, d=2, alpha=5.0, gamma=-0.9, q=1.0)
    base.update(kw)
    return classify(build_kernel(ModelParams(**base)))


@given(st.floats(0.01, 1.0), st.floats(-1.0, -0.01), st.floats(0.5, 10))
def test_classes_partition_levels(q, gamma, alpha):
    c = _cls(q=q, gamma=gamma, alpha=alpha, N=40)
    a = c.a_class
    assert a.size == 41
    assert set(np.unique(a)) <= {1, 2, 3, 4}
    assert np.array_equal(a == AClass.A1, c.in_B & ~c.in_C)
    assert np.array_equal(a == AClass.A2, c.in_B & c.in_C)
    assert np.array_equal(a == AClass.A3, ~c.in_B & ~c.in_C)
    assert np.array_equal(a == AClass.A4, ~c.in_B & c.in_C)


def test_q_one_has_no_oscillation():
    # with q = 1 both thresholds vanish and every level is in B or C
    for alpha in (2.0, 4.1, 5.0):
        c = _cls(alpha=alpha, q=1.0)
        assert not c.a3_levels
        k = build_kernel(c.params)
        assert np.all((c.a_class == AClass.A1) == (k.e_plus > 1e-12))


def test_classification_thresholds_against_definition():
    c = _cls(q=0.5, gamma=-0.7)
    k = build_kernel(c.params)
    x = k.fraction_plus
    t = 1 - 1 / 0.5
    assert np.array_equal(c.in_B, k.e_plus >= t * (1 - x) - 1e-12)
    assert np.array_equal(c.in_C, k.e_plus <= t * x + 1e-12)


def test_classify_rejects_finite_beta():
    with pytest.raises(InvalidParameter):
        classify(build_kernel(ModelParams(N=16, d=1, alpha=1, beta=3.0)))


def test_eta2_steady_maps_each_class():
    c = _cls(q=0.3)
    init = np.where(np.arange(129) % 2 == 0, 1, -1)
    ss = eta2_steady(c, init)
    for lvl, a in enumerate(c.a_class):
        v = ss.values[lvl]
        if a == AClass.A1:
            assert v == 1
        elif a == AClass.A4:
            assert v == -1
        elif a == AClass.A2:
            assert v == Frozen(int(init[lvl])) and ss.settled(lvl) == init[lvl]
        else:
            assert v is OSCILLATING and ss.settled(lvl) is None
    assert any(v is OSCILLATING for v in ss.values)


def test_eta2_steady_validates_input():
    c = _cls(N=16, d=1, alpha=1.0)
    with pytest.raises(InvalidParameter):
        eta2_steady(c, np.ones(16))
    with pytest.raises(InvalidParameter):
        eta2_steady(c, np.zeros(17))


@given(st.integers(0, 24), st.floats(0.05, 1.0), st.floats(0.1, 20))
def test_lambda_rows_sum_to_one(i, q, beta):
    p = ModelParams(N=24, d=1, alpha=3.0, gamma=-0.6, q=q, beta=beta)
    for a in (1, -1):
        total = lambda_finite_beta(p, i, a, 1) + lambda_finite_beta(p, i, a, -1)
        assert total == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= lambda_finite_beta(p, i, a, a) <= 1.0


def _sign_is_determined(atoms):
    signs = {np.sign(h) for h, _ in atoms}
    return len(signs) == 1 and 0 not in signs


@pytest.mark.parametrize("kw", [dict(N=64, d=2, alpha=6.0, gamma=-0.7, q=0.6),
                                dict(N=48, d=1, alpha=3.0, gamma=-0.3, q=0.9),
                                dict(N=128, d=2, alpha=5.0, gamma=-0.9, q=0.85)])
def test_lambda_trend_towards_classification(kw):
    # Where every neighbour draw gives the same field sign the heat-bath
    # realisation of E+ becomes deterministic, so lambda must tend to the
    # frozen pattern.  Elsewhere the realisation stays random for all beta.
    p = ModelParams(**kw)
    c = classify(build_kernel(p))
    det = np.array([(i == 0 or _sign_is_determined(_field_atoms(p, i)[0]))
                    and (i == p.N or _sign_is_determined(_field_atoms(p, i)[1]))
                    for i in range(p.N + 1)])
    assert det.any()
    errs = []
    for beta in (1.0, 10.0, 100.0, 1000.0):
        sp, sm = lambda_stay_table(p.with_(beta=beta))
        errs.append(max(np.max(np.abs(sp - c.in_B)[det]), np.max(np.abs(sm - c.in_C)[det])))
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-9


def test_lambda_rejects_frozen_and_bad_args():
    p = ModelParams(N=16, d=1, alpha=1.0)
    with pytest.raises(InvalidParameter):
        lambda_finite_beta(p, 3, 1, 1)
    pf = p.with_(beta=1.0)
    with pytest.raises(InvalidParameter):
        lambda_finite_beta(pf, 3, 0, 1)
    with pytest.raises(InvalidParameter):
        lambda_finite_beta(pf, 17, 1, 1)
