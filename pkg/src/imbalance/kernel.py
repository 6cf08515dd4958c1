"""Frozen-phase transition kernel of the imbalance chain ``N+``.

A site with spin ``+1`` at imbalance level ``i`` sees ``U ~ H(N-1, i-1, 2d)``
positive neighbours; a site with spin ``-1`` sees ``V ~ H(N-1, i, 2d)``.  In the
frozen phase a spin keeps its sign when its field agrees with it or is zero,
which turns the stay probabilities into tail sums of those hypergeometric
laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .params import InvalidParameter, ModelParams

__all__ = [
    "TransitionKernel",
    "build_kernel",
    "expected_imbalance_impact",
    "hypergeom_pmf",
    "hypergeom_pmf_exact",
    "level_transition_probs",
    "stay_probabilities",
]


def _check_hypergeom(population, successes, draws, k):
    for name, v in (("population", population), ("successes", successes),
                    ("draws", draws), ("k", k)):
        if int(v) != v or v < 0:
            raise InvalidParameter(f"{name} must be a non-negative integer, got {v!r}")
    if successes > population or draws > population:
        raise InvalidParameter(
            f"need successes <= population and draws <= population, got "
            f"({population}, {successes}, {draws})"
        )


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def hypergeom_pmf(population: int, successes: int, draws: int, k: int) -> float:
    """Probability of ``k`` successes in ``draws`` draws without replacement.

    Evaluated through log-gamma so that populations up to ``10**6`` and beyond
    do not overflow.  Returns 0 outside the support.
    """
    _check_hypergeom(population, successes, draws, k)
    failures = population - successes
    if k > successes or draws - k > failures or k > draws:
        return 0.0
    if draws == 0:
        return 1.0
    logp = (_log_comb(successes, k) + _log_comb(failures, draws - k)
            - _log_comb(population, draws))
    return math.exp(logp)


def hypergeom_pmf_exact(population: int, successes: int, draws: int, k: int) -> Fraction:
    """Exact rational counterpart of :func:`hypergeom_pmf`."""
    _check_hypergeom(population, successes, draws, k)
    failures = population - successes
    if k > successes or draws - k > failures or k > draws:
        return Fraction(0)
    return Fraction(math.comb(successes, k) * math.comb(failures, draws - k),
                    math.comb(population, draws))


def _excess(alpha: float, i: int, N: int) -> int:
    # ceil(alpha * |i/N - 1/2|), evaluated in exact arithmetic so that both
    # backends pick identical summation ranges
    return math.ceil(Fraction(alpha) * abs(Fraction(2 * i - N, 2 * N)))


def _stay_ranges(params: ModelParams, i: int):
    N, d = params.N, params.d
    c = _excess(params.alpha, i, N)
    if c > d:  # outside the band [N(1/2 - d/alpha), N(1/2 + d/alpha)]
        return None, None
    plus = (max(d + c, i + 2 * d - N), min(2 * d, i))
    minus = (max(0, i + 2 * d - N), min(d - c, i))
    return plus, minus


def stay_probabilities(params: ModelParams, i: int, exact: bool = False):
    """Return ``(P̄++(i), P̄--(i))``, the frozen-phase stay probabilities.

    ``P̄++`` is the chance that a ``+1`` spin keeps its sign when updated by
    the Hamiltonian rule at level ``i``; ``P̄--`` likewise for a ``-1`` spin.
    With ``exact=True`` the values are :class:`fractions.Fraction`.
    """
    N, d = params.N, params.d
    if int(i) != i or not 0 <= i <= N:
        raise InvalidParameter(f"level must be an integer in [0, {N}], got {i!r}")
    i = int(i)
    pmf = hypergeom_pmf_exact if exact else hypergeom_pmf
    zero = Fraction(0) if exact else 0.0
    plus, minus = _stay_ranges(params, i)
    if plus is None:
        return zero, zero
    s_plus = zero
    if i >= 1:
        for j in range(plus[0], plus[1] + 1):
            s_plus += pmf(N - 1, i - 1, 2 * d, j)
    s_minus = zero
    if i <= N - 1:
        for j in range(minus[0], minus[1] + 1):
            s_minus += pmf(N - 1, i, 2 * d, j)
    return s_plus, s_minus


@lru_cache(maxsize=256)
def _stay_vectors(N: int, d: int, alpha: float):
    p = ModelParams(N=N, d=d, alpha=alpha)
    sp = np.empty(N + 1)
    sm = np.empty(N + 1)
    for i in range(N + 1):
        sp[i], sm[i] = stay_probabilities(p, i)
    # guard against lgamma rounding pushing a full-support sum past 1
    np.clip(sp, 0.0, 1.0, out=sp)
    np.clip(sm, 0.0, 1.0, out=sm)
    sp.flags.writeable = False
    sm.flags.writeable = False
    return sp, sm


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Per-level frozen-phase probabilities for ``i = 0..N``.

    ``stay_plus``/``stay_minus`` hold ``P̄++``/``P̄--``; ``e_plus`` holds the
    expected imbalance impact ``E+``.  The four ``P_ab`` vectors are derived.
    """

    params: ModelParams
    stay_plus: np.ndarray
    stay_minus: np.ndarray
    e_plus: np.ndarray

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.params.N + 1)

    @property
    def fraction_plus(self) -> np.ndarray:
        return self.levels / self.params.N

    @property
    def p_pp(self) -> np.ndarray:
        return self.fraction_plus * self.stay_plus

    @property
    def p_pm(self) -> np.ndarray:
        return self.fraction_plus * (1.0 - self.stay_plus)

    @property
    def p_mm(self) -> np.ndarray:
        return (1.0 - self.fraction_plus) * self.stay_minus

    @property
    def p_mp(self) -> np.ndarray:
        return (1.0 - self.fraction_plus) * (1.0 - self.stay_minus)

    def rows(self):
        """Yield ``(i, stay_plus, stay_minus, p_pp, p_pm, p_mm, p_mp, e_plus)``."""
        cols = (self.stay_plus, self.stay_minus, self.p_pp, self.p_pm,
                self.p_mm, self.p_mp, self.e_plus)
        for i in range(self.params.N + 1):
            yield (i, *(float(c[i]) for c in cols))


def build_kernel(params: ModelParams) -> TransitionKernel:
    """Precompute the frozen-phase kernel for ``params``.

    The stay vectors depend only on ``(N, d, alpha)`` and are cached.
    """
    sp, sm = _stay_vectors(params.N, params.d, float(params.alpha))
    x = np.arange(params.N + 1) / params.N
    e = (1.0 - x) * (1.0 - sm) + params.gamma * x * (1.0 - sp)
    e.flags.writeable = False
    return TransitionKernel(params=params, stay_plus=sp, stay_minus=sm, e_plus=e)


def level_transition_probs(params: ModelParams, i: int, exact: bool = False):
    """``(P++, P+-, P--, P-+)`` at level ``i``; the four entries sum to one."""
    sp, sm = stay_probabilities(params, i, exact=exact)
    x = Fraction(i, params.N) if exact else i / params.N
    return x * sp, x * (1 - sp), (1 - x) * sm, (1 - x) * (1 - sm)


def expected_imbalance_impact(params: ModelParams, i: int, exact: bool = False):
    """Frozen-phase ``E+(i) = P-+(i) + gamma * P+-(i)``.

    This is the expected normalised price move produced by one Hamiltonian
    update at level ``i``; it lies in ``[gamma, 1]``.
    """
    if not params.frozen:
        raise InvalidParameter("E+ is deterministic only in the frozen phase (beta = INFINITY)")
    _, p_pm, _, p_mp = level_transition_probs(params, i, exact=exact)
    gamma = Fraction(params.gamma) if exact else params.gamma
    return p_mp + gamma * p_pm
