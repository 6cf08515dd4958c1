"""Expected wealth increments, majority opinion and the optimal q search.

Every increment is linear in ``f(1, N) * P``; figure-level numbers use the
normalisation ``f(1, N) * P = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import TransitionKernel, build_kernel
from .measure import InvariantMeasure
from .params import InvalidParameter, ModelParams

__all__ = [
    "ConflictReport",
    "ImpactFunction",
    "QStarResult",
    "agent_expected_increment",
    "agent_increment_vector",
    "conflict_scan",
    "majority_opinion",
    "majority_vector",
    "market_expected_increment",
    "market_increment_vector",
    "optimal_q",
    "stationary_expected_increment",
]


@dataclass(frozen=True)
class ImpactFunction:
    """Price impact ``f(x, N)`` restricted to one-step imbalances ``x in {-1, 0, 1}``."""

    gamma: float
    f_plus: float = 1.0

    def __post_init__(self):
        if not self.f_plus > 0:
            raise InvalidParameter(f"f(1,N) must be > 0, got {self.f_plus!r}")
        if not -1.0 <= self.gamma < 0.0:
            raise InvalidParameter(f"gamma must lie in [-1, 0), got {self.gamma!r}")

    @classmethod
    def for_params(cls, params: ModelParams, f_plus: float = 1.0) -> "ImpactFunction":
        return cls(gamma=params.gamma, f_plus=f_plus)

    def __call__(self, imbalance: int) -> float:
        if imbalance == 0:
            return 0.0
        if imbalance == 1:
            return self.f_plus
        if imbalance == -1:
            return self.gamma * self.f_plus
        raise ValueError(f"one-step imbalance must be -1, 0 or 1, got {imbalance!r}")


def _check(kernel: TransitionKernel, impact: ImpactFunction):
    if not kernel.params.frozen:
        raise InvalidParameter("wealth expectations are defined in the frozen phase")
    if impact.gamma != kernel.params.gamma:
        raise InvalidParameter(
            f"impact gamma {impact.gamma} differs from model gamma {kernel.params.gamma}"
        )


def _prefactor(impact: ImpactFunction, price: float) -> float:
    # -f(1,N) P (1 + 1/gamma); exactly zero at gamma = -1
    return -impact.f_plus * price * (1.0 + 1.0 / impact.gamma)


def agent_increment_vector(kernel, impact, price, spin):
    _check(kernel, impact)
    N = kernel.params.N
    return spin * _prefactor(impact, price) * (1.0 - 1.0 / N) * kernel.e_plus


def agent_expected_increment(kernel: TransitionKernel, impact: ImpactFunction,
                             price: float, i: int, spin: int) -> float:
    """Conditional expected one-epoch wealth change of an agent holding ``spin``."""
    if spin not in (1, -1):
        raise InvalidParameter("spin must be +1 or -1")
    return float(agent_increment_vector(kernel, impact, price, spin)[i])


def market_increment_vector(kernel, impact, price):
    _check(kernel, impact)
    N = kernel.params.N
    i = kernel.levels
    bracket = ((2 * i - N + 1) * kernel.p_mp
               + impact.gamma * (2 * i - N - 1) * kernel.p_pm)
    return _prefactor(impact, price) * bracket


def market_expected_increment(kernel: TransitionKernel, impact: ImpactFunction,
                              price: float, i: int) -> float:
    return float(market_increment_vector(kernel, impact, price)[i])


def stationary_expected_increment(measure: InvariantMeasure, kernel: TransitionKernel,
                                  impact: ImpactFunction, price: float = 1.0) -> float:
    """Mean of the market increment under the invariant measure."""
    pi = measure.require()
    return float(np.dot(pi, market_increment_vector(kernel, impact, price)))


def majority_vector(kernel, impact, price):
    N = kernel.params.N
    i = kernel.levels
    up = np.sign(agent_increment_vector(kernel, impact, price, 1))
    dn = np.sign(agent_increment_vector(kernel, impact, price, -1))
    return (i * up + (N - i) * dn).astype(int)


def majority_opinion(kernel: TransitionKernel, impact: ImpactFunction,
                     price: float, i: int) -> int:
    """Sum over agents of the sign of their expected increment (``sgn 0 = 0``)."""
    return int(majority_vector(kernel, impact, price)[i])


@dataclass
class ConflictCell:
    params: ModelParams
    exists: bool
    market_sign: np.ndarray
    majority_sign: np.ndarray

    @property
    def disagreements(self) -> np.ndarray:
        return np.flatnonzero(self.market_sign * self.majority_sign == -1)

    @property
    def super_violations(self) -> np.ndarray:
        # market supermartingale but majority positive
        return np.flatnonzero((self.market_sign < 0) & (self.majority_sign > 0))

    @property
    def disagreement_violations(self) -> np.ndarray:
        d = self.disagreements
        return d[self.market_sign[d] <= 0]


@dataclass
class ConflictReport:
    cells: list = field(default_factory=list)

    @property
    def disagreement_count(self) -> int:
        return sum(c.disagreements.size for c in self.cells)

    @property
    def violations(self) -> list:
        out = []
        for c in self.cells:
            for lvl in c.super_violations:
                out.append((c.params, int(lvl), "market<0 but M>0"))
            for lvl in c.disagreement_violations:
                out.append((c.params, int(lvl), "disagreement with market<=0"))
        return out


def conflict_scan(grid, price: float = 1.0, f_plus: float = 1.0,
                  existing_only: bool = False) -> ConflictReport:
    """Compare market and majority signs at every level of every grid cell.

    A disagreement is a level where both signs are non-zero and opposite.
    """
    from .attractors import classify

    report = ConflictReport()
    for params in grid:
        kernel = build_kernel(params)
        impact = ImpactFunction.for_params(params, f_plus)
        exists = not classify(kernel).a3_levels
        if existing_only and not exists:
            continue
        report.cells.append(ConflictCell(
            params=params,
            exists=exists,
            market_sign=np.sign(market_increment_vector(kernel, impact, price)).astype(int),
            majority_sign=np.sign(majority_vector(kernel, impact, price)).astype(int),
        ))
    return report


@dataclass
class QStarResult:
    q_star: float | None
    dw_star: float | None
    unique: bool | None
    branch: dict | None
    tie: bool
    runner_up: tuple | None
    skipped: list
    table: list


def _tied(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-15)


def optimal_q(base: ModelParams, q_grid=None, price: float = 1.0,
              f_plus: float = 1.0) -> QStarResult:
    """Grid search for the q maximising the stationary market increment.

    Non-unique cells contribute their best branch.  Cells without an
    invariant measure, or whose chain is reducible, are skipped and listed.
    Ties resolve to the smaller q and set ``tie``.  ``runner_up`` is the best
    ``(q, dW)`` among the remaining grid points.
    """
    from .sweep import evaluate_cell

    if q_grid is None:
        q_grid = [round(0.01 * k, 2) for k in range(1, 101)]
    table, skipped = [], []
    for q in q_grid:
        cell = evaluate_cell(base.with_(q=float(q)), price=price, f_plus=f_plus)
        table.append(cell)
        if cell.dw is None:
            skipped.append((float(q), cell.status))
    scored = [c for c in table if c.dw is not None]
    if not scored:
        return QStarResult(None, None, None, None, False, None, skipped, table)
    best = scored[0]
    for c in scored[1:]:
        if c.dw > best.dw and not _tied(c.dw, best.dw):
            best = c
    tie = any(c is not best and _tied(c.dw, best.dw) for c in scored)
    rest = [c for c in scored if c is not best]
    runner = max(rest, key=lambda c: c.dw) if rest else None
    return QStarResult(
        q_star=best.params.q, dw_star=best.dw, unique=best.unique,
        branch=best.best_branch, tie=tie,
        runner_up=(runner.params.q, runner.dw) if runner else None,
        skipped=skipped, table=table,
    )
