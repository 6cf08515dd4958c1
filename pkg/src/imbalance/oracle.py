"""Brute-force ground truth for small instances.

Nothing here reuses the closed forms it is meant to check: flip probabilities
come from enumerating neighbourhoods and spin layouts directly, and stationary
laws come from a dense linear solve on the explicit birth-death matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .attractors import AClass, Classification
from .kernel import TransitionKernel
from .params import InvalidParameter

__all__ = [
    "BirthDeathMatrix",
    "StationarySolution",
    "build_chain",
    "enumerate_flip_probs",
    "stationary_solve",
]

RATE_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class BirthDeathMatrix:
    """Embedded one-step chain on levels ``0..N``."""

    up: np.ndarray
    down: np.ndarray

    @property
    def N(self) -> int:
        return self.up.size - 1

    @property
    def stay(self) -> np.ndarray:
        return 1.0 - self.up - self.down

    def dense(self) -> np.ndarray:
        n = self.up.size
        T = np.diag(self.stay)
        T[np.arange(n - 1), np.arange(1, n)] = self.up[:-1]
        T[np.arange(1, n), np.arange(n - 1)] = self.down[1:]
        return T


def _indicators(classification: Classification, branch):
    cls = classification.a_class
    if np.any(cls == AClass.A3):
        raise InvalidParameter("the chain has no steady eta2: A3 is non-empty")
    a1 = cls == AClass.A1
    a4 = cls == AClass.A4
    branch = dict(branch or {})
    for lvl in np.flatnonzero(cls == AClass.A2):
        v = branch.get(int(lvl))
        if v not in (1, -1):
            raise InvalidParameter(f"branch must assign +1/-1 to A2 level {int(lvl)}")
        (a1 if v == 1 else a4)[lvl] = True
    return a1.astype(float), a4.astype(float)


def build_chain(kernel: TransitionKernel, classification: Classification,
                branch=None) -> BirthDeathMatrix:
    """Materialise the up/down probabilities of ``N+`` under steady ``eta2``.

    A Hamiltonian update (probability ``q``) flips the chosen spin with the
    frozen-phase kernel; a strategic update copies ``eta2`` at the current
    level, so it raises ``N+`` only from an A1' level and lowers it only from
    an A4' level.
    """
    p = kernel.params
    chi1, chi4 = _indicators(classification, branch)
    x = np.arange(p.N + 1) / p.N
    up = (1.0 - x) * (p.q * (1.0 - kernel.stay_minus) + (1.0 - p.q) * chi1)
    down = x * (p.q * (1.0 - kernel.stay_plus) + (1.0 - p.q) * chi4)
    return BirthDeathMatrix(up=up, down=down)


@dataclass
class StationarySolution:
    pi: np.ndarray | None
    recurrent_classes: list = field(default_factory=list)
    transient: list = field(default_factory=list)

    @property
    def reducible(self) -> bool:
        return len(self.recurrent_classes) != 1 or bool(self.transient)


def _communicating_blocks(up, down):
    n = up.size
    blocks, start = [], 0
    for i in range(n - 1):
        if up[i] <= RATE_TOL or down[i + 1] <= RATE_TOL:
            blocks.append((start, i))
            start = i + 1
    blocks.append((start, n - 1))
    return blocks


def stationary_solve(matrix: BirthDeathMatrix, max_levels: int = 2049) -> StationarySolution:
    """Solve ``pi T = pi`` with a dense linear system.

    Rates at or below ``RATE_TOL`` are treated as zero when splitting the
    chain into communicating blocks.  A block is recurrent when it cannot be
    left.  With exactly one recurrent block the stationary vector is returned
    (zero on transient levels); otherwise ``pi`` is None and the blocks are
    reported.
    """
    up, down = matrix.up, matrix.down
    if up.size > max_levels:
        raise InvalidParameter(f"dense solve capped at {max_levels} levels, got {up.size}")
    recurrent, transient = [], []
    for lo, hi in _communicating_blocks(up, down):
        leaks_up = hi < up.size - 1 and up[hi] > RATE_TOL
        leaks_down = lo > 0 and down[lo] > RATE_TOL
        if leaks_up or leaks_down:
            transient.extend(range(lo, hi + 1))
        else:
            recurrent.append((lo, hi))
    if len(recurrent) != 1:
        return StationarySolution(pi=None, recurrent_classes=recurrent, transient=transient)
    lo, hi = recurrent[0]
    T = matrix.dense()[lo:hi + 1, lo:hi + 1]
    n = hi - lo + 1
    A = T.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    sub = np.linalg.solve(A, rhs)
    pi = np.zeros(up.size)
    pi[lo:hi + 1] = np.clip(sub, 0.0, None)
    pi /= pi.sum()
    return StationarySolution(pi=pi, recurrent_classes=recurrent, transient=transient)


def enumerate_flip_probs(N: int, d: int, alpha: float, i: int) -> tuple[Fraction, Fraction]:
    """Exact ``(P̄++, P̄--)`` by exhaustive enumeration.

    The updated site is site 0.  Every placement of the remaining ``+1``
    spins on the other ``N - 1`` sites and every ``2d``-subset of those sites
    as the neighbourhood is visited; the local field
    ``sum(neighbours) - alpha * s0 * |sum(all)| / N`` decides the move, with a
    zero field leaving the spin unchanged.
    """
    if N > 16:
        raise InvalidParameter("enumeration is meant for N <= 16")
    if not 0 <= i <= N:
        raise InvalidParameter(f"level must lie in [0, {N}]")
    alpha = Fraction(alpha)
    total = Fraction(abs(2 * i - N), N)
    threshold = alpha * total
    others = N - 1
    hoods = list(itertools.combinations(range(others), 2 * d))

    def stay_fraction(own: int, n_plus_others: int) -> Fraction:
        if n_plus_others < 0 or n_plus_others > others:
            return Fraction(0)
        stays = count = 0
        for plus_sites in itertools.combinations(range(others), n_plus_others):
            spins = [-1] * others
            for s in plus_sites:
                spins[s] = 1
            for hood in hoods:
                # h * own = own * sum(neighbours) - alpha * total, compared exactly
                count += 1
                if own * sum(spins[y] for y in hood) >= threshold:
                    stays += 1
        return Fraction(stays, count)

    stay_plus = stay_fraction(+1, i - 1) if i >= 1 else Fraction(0)
    stay_minus = stay_fraction(-1, i) if i <= N - 1 else Fraction(0)
    return stay_plus, stay_minus
