"""Invariant measures of the imbalance level ``N+``.

When no level oscillates (A3 empty) the chain on ``0..N`` is a birth-death
chain and its stationary law has the product form::

    g(l) = C(N, l) * prod_{j<l} [1 - q P̄--(j) - (1-q) 1{A4'}(j)]
                              / [1 - q P̄++(j+1) - (1-q) 1{A1'}(j+1)]

normalised over ``0..N``.  A1'/A4' are A1/A4 extended by the A2 levels whose
initial expectation spin is +1/-1, so every assignment on A2 yields its own
branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .attractors import AClass, Classification
from .kernel import TransitionKernel
from .params import ModelParams

__all__ = [
    "BranchExplosion",
    "DEGENERATE_TOL",
    "DegenerateChain",
    "InvariantMeasure",
    "MeasureStats",
    "NoInvariantMeasure",
    "all_branches",
    "branch_order",
    "invariant_measure",
    "measure_stats",
]

DEGENERATE_TOL = 1e-13
BRANCH_CAP = 20
MODE_TIE_RTOL = 1e-12


class DegenerateChain(ArithmeticError):
    """A denominator of the product form vanished; the chain is not irreducible."""

    def __init__(self, level: int, value: float):
        super().__init__(
            f"level {level} cannot move down (rate factor {value:.3g}); "
            "product form is invalid, use the dense oracle solve"
        )
        self.level = level
        self.value = value


class NoInvariantMeasure(RuntimeError):
    """Raised when a stationary law is requested but A3 is non-empty."""


class BranchExplosion(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class InvariantMeasure:
    params: ModelParams
    pi: np.ndarray | None
    branch: dict = field(default_factory=dict)
    exists: bool = True
    unique: bool = True
    a2_levels: tuple = ()
    a3_levels: tuple = ()
    log_g: np.ndarray | None = None

    def require(self) -> np.ndarray:
        if not self.exists or self.pi is None:
            raise NoInvariantMeasure(
                f"no invariant measure: eta2 oscillates on levels {list(self.a3_levels)}"
            )
        return self.pi


def _effective_sets(classification: Classification, branch: dict):
    cls = classification.a_class
    a1 = cls == AClass.A1
    a4 = cls == AClass.A4
    for lvl in np.flatnonzero(cls == AClass.A2):
        v = branch.get(int(lvl))
        if v not in (1, -1):
            raise ValueError(f"branch must assign +1 or -1 to A2 level {int(lvl)}")
        if v == 1:
            a1[lvl] = True
        else:
            a4[lvl] = True
    return a1, a4


def invariant_measure(kernel: TransitionKernel, classification: Classification,
                      branch: dict | None = None) -> InvariantMeasure:
    """Stationary law of ``N+`` for one assignment of ``eta2`` on A2.

    Returns an ``exists=False`` record when A3 is non-empty.  Raises
    :class:`DegenerateChain` if a reachable level has a vanishing downward
    factor.
    """
    params = kernel.params
    a2 = tuple(classification.a2_levels)
    a3 = tuple(classification.a3_levels)
    branch = {int(k): int(v) for k, v in (branch or {}).items()}
    if a3:
        return InvariantMeasure(params=params, pi=None, branch=branch, exists=False,
                                unique=False, a2_levels=a2, a3_levels=a3)
    a1, a4 = _effective_sets(classification, branch)
    q, N = params.q, params.N
    num = 1.0 - q * kernel.stay_minus - (1.0 - q) * a4
    den = 1.0 - q * kernel.stay_plus - (1.0 - q) * a1

    log_g = np.full(N + 1, -np.inf)
    log_g[0] = 0.0
    acc = 0.0
    for j in range(N):
        if num[j] <= DEGENERATE_TOL:
            # level j cannot move up; the levels above are transient only if
            # each of them can still move down
            stuck = np.flatnonzero(den[j + 1:] <= DEGENERATE_TOL)
            if stuck.size:
                lvl = j + 1 + int(stuck[0])
                raise DegenerateChain(lvl, float(den[lvl]))
            break
        if den[j + 1] <= DEGENERATE_TOL:
            raise DegenerateChain(j + 1, float(den[j + 1]))
        acc += math.log(num[j]) - math.log(den[j + 1])
        log_g[j + 1] = acc
    levels = np.arange(N + 1)
    log_binom = gammaln(N + 1) - gammaln(levels + 1) - gammaln(N - levels + 1)
    log_g = log_g + log_binom
    pi = np.exp(log_g - logsumexp(log_g))
    return InvariantMeasure(params=params, pi=pi, branch=branch, exists=True,
                            unique=not a2, a2_levels=a2, a3_levels=a3, log_g=log_g)


def branch_order(a2_levels) -> list[dict]:
    """All +/-1 assignments over ``a2_levels`` in binary counting order.

    Bit ``k`` of the counter drives the ``k``-th lowest A2 level; a 0 bit
    means +1, so the first branch is all +1.
    """
    levels = sorted(int(v) for v in a2_levels)
    out = []
    for m in range(2 ** len(levels)):
        out.append({lvl: (-1 if (m >> k) & 1 else 1) for k, lvl in enumerate(levels)})
    return out


def all_branches(kernel: TransitionKernel, classification: Classification,
                 cap: int = BRANCH_CAP) -> list[InvariantMeasure]:
    a2 = classification.a2_levels
    if len(a2) > cap:
        raise BranchExplosion(f"|A2| = {len(a2)} exceeds the branch cap {cap}")
    return [invariant_measure(kernel, classification, b) for b in branch_order(a2)]


@dataclass(frozen=True)
class MeasureStats:
    global_mode: int
    mode_mass_5: float
    mean: float
    mode_list: tuple
    mode_tie: bool = False


def measure_stats(measure: InvariantMeasure) -> MeasureStats:
    """Mode, mass within two levels of the mode, mean and local maxima.

    Levels within a relative ``MODE_TIE_RTOL`` of the maximum count as tied;
    ties go to the lowest level and set ``mode_tie``.  A local maximum must
    beat its left neighbour strictly and be at least its right neighbour, so a
    plateau reports its lowest level.
    """
    pi = measure.require()
    n = pi.size
    top = pi.max()
    argmax = np.flatnonzero(pi >= top * (1.0 - MODE_TIE_RTOL))
    mode = int(argmax[0])
    lo, hi = max(0, mode - 2), min(n - 1, mode + 2)
    mass5 = float(pi[lo:hi + 1].sum())
    mean = float(np.dot(np.arange(n), pi))
    modes = []
    for i in range(n):
        left_ok = i == 0 or pi[i] > pi[i - 1]
        right_ok = i == n - 1 or pi[i] >= pi[i + 1]
        if left_ok and right_ok and pi[i] > 0:
            modes.append(i)
    if mode not in modes:
        # rounding can leave the lowest tied maximum a hair below its left neighbour
        modes = sorted(set(modes) | {mode})
    return MeasureStats(global_mode=mode, mode_mass_5=min(mass5, 1.0), mean=mean,
                        mode_list=tuple(modes), mode_tie=argmax.size > 1)
