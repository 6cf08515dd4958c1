"""Per-cell evaluation used by parameter sweeps and the q* search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .attractors import classify
from .kernel import build_kernel
from .measure import (BRANCH_CAP, DegenerateChain, InvariantMeasure,
                      branch_order, invariant_measure, measure_stats)
from .oracle import build_chain, stationary_solve
from .params import InvalidParameter, ModelParams
from .wealth import (ImpactFunction, majority_vector, market_increment_vector,
                     stationary_expected_increment)

__all__ = ["CellResult", "evaluate_cell", "grid", "parse_range", "solve_branch"]


@dataclass
class CellResult:
    params: ModelParams
    status: str  # ok | no-measure | reducible | branch-explosion
    exists: bool
    unique: bool
    a2_levels: list
    a3_levels: list
    n_branches: int = 0
    best_branch: dict | None = None
    mode: int | None = None
    mean: float | None = None
    mass5: float | None = None
    dw: float | None = None
    dw_min: float | None = None
    disagreement_count: int = 0
    fallback: list = field(default_factory=list)


def solve_branch(kernel, cls, branch):
    """Product form, or the dense solve when the product form degenerates."""
    try:
        return invariant_measure(kernel, cls, branch), None
    except DegenerateChain as exc:
        sol = stationary_solve(build_chain(kernel, cls, branch))
        note = {"level": exc.level, "recurrent_classes": sol.recurrent_classes}
        if sol.pi is None:
            return None, note
        m = InvariantMeasure(params=kernel.params, pi=sol.pi, branch=dict(branch),
                             exists=True, unique=not cls.a2_levels,
                             a2_levels=tuple(cls.a2_levels))
        return m, note


def evaluate_cell(params: ModelParams, price: float = 1.0, f_plus: float = 1.0,
                  branch_cap: int = BRANCH_CAP) -> CellResult:
    kernel = build_kernel(params)
    cls = classify(kernel)
    impact = ImpactFunction.for_params(params, f_plus)
    market = market_increment_vector(kernel, impact, price)
    disagree = int(np.sum(np.sign(market) * np.sign(majority_vector(kernel, impact, price)) == -1))
    res = CellResult(params=params, status="ok", exists=not cls.a3_levels,
                     unique=not cls.a2_levels and not cls.a3_levels,
                     a2_levels=cls.a2_levels, a3_levels=cls.a3_levels,
                     disagreement_count=disagree)
    if cls.a3_levels:
        res.status = "no-measure"
        return res
    if len(cls.a2_levels) > branch_cap:
        res.status = "branch-explosion"
        return res
    best = None
    dws = []
    for branch in branch_order(cls.a2_levels):
        m, note = solve_branch(kernel, cls, branch)
        res.n_branches += 1
        if note is not None:
            res.fallback.append(note)
        if m is None:
            continue
        dw = stationary_expected_increment(m, kernel, impact, price)
        dws.append(dw)
        if best is None or dw > best[0]:
            best = (dw, m)
    if best is None:
        res.status = "reducible"
        return res
    dw, m = best
    st = measure_stats(m)
    res.best_branch = m.branch
    res.mode, res.mean, res.mass5 = st.global_mode, st.mean, st.mode_mass_5
    res.dw, res.dw_min = dw, min(dws)
    return res


def parse_range(text: str) -> list[float]:
    """Parse ``start:stop:step`` (stop inclusive) or a single value."""
    parts = str(text).split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise InvalidParameter(f"range must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise InvalidParameter(f"range step must be > 0, got {text!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    if n <= 0:
        raise InvalidParameter(f"empty range {text!r}")
    return [round(start + k * step, 12) for k in range(n)]


def grid(N: int, d: int, alphas, gammas, qs) -> list[ModelParams]:
    """Cartesian grid in (alpha, gamma, q) order."""
    return [ModelParams(N=N, d=d, alpha=a, gamma=g, q=q)
            for a, g, q in itertools.product(alphas, gammas, qs)]

