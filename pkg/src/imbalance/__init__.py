"""Exact and Monte Carlo analysis of a two-dimensional spin market model."""

from .attractors import (AClass, Classification, EtaTwoSteadyState, Frozen, OSCILLATING,
                         classify, eta2_steady, lambda_finite_beta)
from .kernel import (TransitionKernel, build_kernel, expected_imbalance_impact,
                     hypergeom_pmf, level_transition_probs, stay_probabilities)
from .measure import (BranchExplosion, DegenerateChain, InvariantMeasure, MeasureStats,
                      NoInvariantMeasure, all_branches, invariant_measure, measure_stats)
from .params import INFINITY, InvalidParameter, ModelParams
from .wealth import (ImpactFunction, agent_expected_increment, conflict_scan,
                     majority_opinion, market_expected_increment, optimal_q,
                     stationary_expected_increment)

__version__ = "0.1.0"

__all__ = [
    "AClass", "BranchExplosion", "Classification", "DegenerateChain", "EtaTwoSteadyState",
    "Frozen", "INFINITY", "ImpactFunction", "InvalidParameter", "InvariantMeasure",
    "MeasureStats", "ModelParams", "NoInvariantMeasure", "OSCILLATING", "TransitionKernel",
    "agent_expected_increment", "all_branches", "build_kernel", "classify", "conflict_scan",
    "eta2_steady", "expected_imbalance_impact", "hypergeom_pmf", "invariant_measure",
    "lambda_finite_beta", "level_transition_probs", "majority_opinion",
    "market_expected_increment", "measure_stats", "optimal_q",
    "stationary_expected_increment", "stay_probabilities",
]
