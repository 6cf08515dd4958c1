import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from imbalance import InvalidParameter, ModelParams, build_kernel, hypergeom_pmf
from imbalance.kernel import (expected_imbalance_impact, hypergeom_pmf_exact,
                              level_transition_probs, stay_probabilities)
from imbalance.oracle import enumerate_flip_probs


def comb_pmf(pop, succ, draws, k):
    if k < max(0, draws - (pop - succ)) or k > min(draws, succ):
        return 0.0
    return math.comb(succ, k) * math.comb(pop - succ, draws - k) / math.comb(pop, draws)


def test_hypergeom_degenerate_population():
    assert hypergeom_pmf(10, 3, 0, 0) == 1.0


def test_hypergeom_known_value():
    assert hypergeom_pmf(127, 60, 4, 2) == pytest.approx(comb_pmf(127, 60, 4, 2), rel=1e-12)


@given(st.integers(1, 200).flatmap(lambda n: st.tuples(
    st.just(n), st.integers(0, n), st.integers(0, min(n, 8)))))
def test_hypergeom_matches_comb_and_normalises(args):
    pop, succ, draws = args
    vals = [hypergeom_pmf(pop, succ, draws, k) for k in range(draws + 1)]
    for k, v in enumerate(vals):
        assert v == pytest.approx(comb_pmf(pop, succ, draws, k), rel=1e-10, abs=1e-300)
    assert sum(vals) == pytest.approx(1.0, abs=1e-12)


def test_hypergeom_off_support_and_invalid():
    assert hypergeom_pmf(10, 3, 4, 4) == 0.0
    assert hypergeom_pmf_exact(10, 3, 4, 2) == Fraction(math.comb(3, 2) * math.comb(7, 2),
                                                        math.comb(10, 4))
    with pytest.raises(InvalidParameter):
        hypergeom_pmf(5, 6, 2, 1)


@pytest.mark.parametrize("N", [3, 5, 8, 11])
@pytest.mark.parametrize("alpha", [0.5, 3.0, 7.0])
def test_stay_probabilities_match_enumeration_exactly(N, alpha):
    p = ModelParams(N=N, d=1, alpha=alpha)
    for i in range(N + 1):
        assert tuple(stay_probabilities(p, i, exact=True)) == enumerate_flip_probs(N, 1, alpha, i)


def test_float_kernel_tracks_exact_kernel():
    p = ModelParams(N=40, d=2, alpha=3.3)
    k = build_kernel(p)
    for i in range(p.N + 1):
        sp, sm = stay_probabilities(p, i, exact=True)
        assert k.stay_plus[i] == pytest.approx(float(sp), abs=1e-13)
        assert k.stay_minus[i] == pytest.approx(float(sm), abs=1e-13)


def test_band_outside_is_zero():
    # alpha * |i/N - 1/2| beyond d kills both stay probabilities
    p = ModelParams(N=64, d=2, alpha=20.0)
    k = build_kernel(p)
    x = k.fraction_plus
    far = np.abs(x - 0.5) * p.alpha > p.d + 1e-9
    assert far.any()
    assert np.all(k.stay_plus[far] == 0) and np.all(k.stay_minus[far] == 0)


@given(st.integers(5, 80), st.integers(1, 2), st.floats(0.1, 12))
def test_mirror_symmetry(N, d, alpha):
    if 2 * d > N - 1:
        return
    k = build_kernel(ModelParams(N=N, d=d, alpha=alpha))
    np.testing.assert_allclose(k.stay_plus, k.stay_minus[::-1], atol=1e-12)


@given(st.integers(5, 80), st.floats(0.1, 12), st.floats(-1.0, -0.01), st.floats(0.01, 1.0))
def test_rows_sum_to_one_and_impact_bounds(N, alpha, gamma, q):
    p = ModelParams(N=N, d=2, alpha=alpha, gamma=gamma, q=q)
    k = build_kernel(p)
    np.testing.assert_allclose(k.p_pp + k.p_pm + k.p_mm + k.p_mp, 1.0, atol=1e-12)
    assert np.all(k.e_plus >= gamma - 1e-12) and np.all(k.e_plus <= 1 + 1e-12)


def test_level_probs_and_impact_agree_with_kernel():
    p = ModelParams(N=20, d=1, alpha=2.0, gamma=-0.4)
    k = build_kernel(p)
    pp, pm, mm, mp = level_transition_probs(p, 7)
    assert (pp, pm, mm, mp) == pytest.approx((k.p_pp[7], k.p_pm[7], k.p_mm[7], k.p_mp[7]))
    exact = expected_imbalance_impact(p, 7, exact=True)
    assert isinstance(exact, Fraction)
    assert float(exact) == pytest.approx(k.e_plus[7], abs=1e-13)


def test_boundary_levels():
    k = build_kernel(ModelParams(N=10, d=1, alpha=1.0))
    assert k.p_pp[0] == 0 and k.p_pm[0] == 0
    assert k.p_mm[10] == 0 and k.p_mp[10] == 0


def test_impact_requires_frozen_phase():
    with pytest.raises(InvalidParameter):
        expected_imbalance_impact(ModelParams(N=10, d=1, alpha=1.0, beta=2.0), 3)


@pytest.mark.parametrize("kw", [dict(N=1, d=1, alpha=1), dict(N=4, d=2, alpha=1),
                                dict(N=8, d=1, alpha=0), dict(N=8, d=1, alpha=1, gamma=0),
                                dict(N=8, d=1, alpha=1, q=0), dict(N=8, d=1, alpha=1, beta=-1),
                                dict(N=8, d=1, alpha=float("inf"))])
def test_invalid_params(kw):
    with pytest.raises(InvalidParameter):
        ModelParams(**kw)
