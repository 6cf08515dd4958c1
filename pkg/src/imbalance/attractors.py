"""Classification of imbalance levels into the attractor sets A1..A4.

For each level ``i`` two threshold tests are applied to ``E+(i)``::

    in_B  <=>  E+(i) >= (1 - 1/q) (1 - i/N)
    in_C  <=>  E+(i) <= (1 - 1/q) (i/N)

and the level is assigned A1 = B\\C, A2 = B&C, A3 = neither, A4 = C\\B.  The
expectation spin ``eta2`` then locks to +1 on A1, to -1 on A4, keeps its
initial value on A2 and alternates on A3.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .kernel import TransitionKernel, hypergeom_pmf
from .params import InvalidParameter, ModelParams

__all__ = [
    "AClass",
    "Classification",
    "EtaTwoSteadyState",
    "Frozen",
    "OSCILLATING",
    "TIE_TOL",
    "classify",
    "eta2_steady",
    "lambda_finite_beta",
    "lambda_stay_table",
]

TIE_TOL = 1e-12


class AClass(enum.IntEnum):
    A1 = 1
    A2 = 2
    A3 = 3
    A4 = 4


@dataclass(frozen=True, eq=False)
class Classification:
    params: ModelParams
    in_B: np.ndarray
    in_C: np.ndarray
    a_class: np.ndarray

    def levels_in(self, cls: AClass) -> np.ndarray:
        return np.flatnonzero(self.a_class == cls)

    @property
    def a2_levels(self) -> list[int]:
        return [int(i) for i in self.levels_in(AClass.A2)]

    @property
    def a3_levels(self) -> list[int]:
        return [int(i) for i in self.levels_in(AClass.A3)]

    def rows(self, kernel: TransitionKernel):
        for i in range(self.params.N + 1):
            yield (i, float(kernel.e_plus[i]), bool(self.in_B[i]), bool(self.in_C[i]),
                   AClass(int(self.a_class[i])).name)


def classify(kernel: TransitionKernel) -> Classification:
    """Assign every level ``0..N`` to one of A1..A4.

    Both threshold comparisons accept a residual down to ``-TIE_TOL`` so that
    exact ties (for example ``E+ = 0`` at ``q = 1``) are detected reliably.
    """
    params = kernel.params
    if not params.frozen:
        raise InvalidParameter("classify needs a frozen-phase model; use lambda_finite_beta")
    t = params.threshold_factor
    x = kernel.fraction_plus
    e = kernel.e_plus
    in_B = (e - t * (1.0 - x)) >= -TIE_TOL
    in_C = (t * x - e) >= -TIE_TOL
    a_class = np.where(in_B, np.where(in_C, AClass.A2, AClass.A1),
                       np.where(in_C, AClass.A4, AClass.A3)).astype(np.int8)
    return Classification(params=params, in_B=in_B, in_C=in_C, a_class=a_class)


class _Oscillating:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OSCILLATING"

    def __reduce__(self):
        return (_Oscillating, ())


OSCILLATING = _Oscillating()


@dataclass(frozen=True)
class Frozen:
    """Path-dependent level: ``eta2`` keeps the recorded initial value."""

    initial: int

    def __repr__(self):
        return f"FROZEN({self.initial:+d})"


@dataclass(frozen=True)
class EtaTwoSteadyState:
    values: tuple

    def settled(self, i: int) -> int | None:
        """The eventual value of ``eta2`` at level ``i``, or None on A3."""
        v = self.values[i]
        if v is OSCILLATING:
            return None
        return v.initial if isinstance(v, Frozen) else v


def eta2_steady(classification: Classification, initial_eta2) -> EtaTwoSteadyState:
    init = np.asarray(initial_eta2)
    if init.shape != classification.a_class.shape:
        raise InvalidParameter(
            f"initial_eta2 needs {classification.a_class.size} entries, got {init.size}"
        )
    if not np.all(np.abs(init) == 1):
        raise InvalidParameter("initial_eta2 entries must be +1 or -1")
    out = []
    for cls, v0 in zip(classification.a_class, init):
        if cls == AClass.A1:
            out.append(1)
        elif cls == AClass.A4:
            out.append(-1)
        elif cls == AClass.A2:
            out.append(Frozen(int(v0)))
        else:
            out.append(OSCILLATING)
    return EtaTwoSteadyState(values=tuple(out))


def _field_atoms(params: ModelParams, i: int):
    """Atoms of ``(h_{+1}, weight)`` and ``(h_{-1}, weight)`` at level ``i``."""
    N, d, a = params.N, params.d, params.alpha
    glob = a * abs(2 * i / N - 1)
    if i >= 1:
        plus = [(2 * (u - d) - glob, hypergeom_pmf(N - 1, i - 1, 2 * d, u))
                for u in range(2 * d + 1)]
    else:
        plus = [(0.0, 1.0)]  # no +1 spins; weight i/N = 0 kills the term
    if i <= N - 1:
        minus = [(2 * (v - d) + glob, hypergeom_pmf(N - 1, i, 2 * d, v))
                 for v in range(2 * d + 1)]
    else:
        minus = [(0.0, 1.0)]
    plus = [(h, w) for h, w in plus if w > 0]
    minus = [(h, w) for h, w in minus if w > 0]
    return plus, minus


def lambda_stay_table(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-level stay probabilities ``(lambda_{++}(i), lambda_{--}(i))`` at finite beta."""
    if params.frozen:
        raise InvalidParameter("lambda at beta = INFINITY is deterministic; use classify")
    stay_p = np.empty(params.N + 1)
    stay_m = np.empty(params.N + 1)
    for i in range(params.N + 1):
        stay_p[i], stay_m[i] = _lambda_row(params, i)
    return stay_p, stay_m


def lambda_finite_beta(params: ModelParams, i: int, a: int, b: int) -> float:
    """Probability that ``eta2`` at level ``i`` moves from ``a`` to ``b`` in one epoch.

    The random quantity is the heat-bath realisation of ``E+`` driven by the
    independent hypergeometric neighbour counts; its joint support has at most
    ``(2d + 1)**2`` atoms and is enumerated exactly.  A ``+1`` level stays
    when the B test passes and a ``-1`` level stays when the C test passes, so
    that ``beta -> infinity`` recovers :func:`classify`.  Exact ties count as
    staying.
    """
    if a not in (1, -1) or b not in (1, -1):
        raise InvalidParameter("a and b must be +1 or -1")
    if int(i) != i or not 0 <= i <= params.N:
        raise InvalidParameter(f"level must lie in [0, {params.N}]")
    if params.frozen:
        raise InvalidParameter("lambda_finite_beta needs finite beta; use classify")
    stay_p, stay_m = _lambda_row(params, int(i))
    stay = stay_p if a == 1 else stay_m
    return stay if a == b else 1.0 - stay


def _lambda_row(params: ModelParams, i: int):
    N = params.N
    t = params.threshold_factor
    x = i / N
    plus, minus = _field_atoms(params, i)
    sp = sm = 0.0
    for hp, wp in plus:
        down = params.gamma * x * expit(-2.0 * params.beta * hp)
        for hm, wm in minus:
            e = (1.0 - x) * expit(2.0 * params.beta * hm) + down
            if e - t * (1.0 - x) >= -TIE_TOL:
                sp += wp * wm
            if t * x - e >= -TIE_TOL:
                sm += wp * wm
    return min(sp, 1.0), min(sm, 1.0)
