"""Model parameters shared by every module."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

INFINITY = math.inf


class InvalidParameter(ValueError):
    """Raised when a parameter set violates the model's validity constraints."""


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the two-dimensional spin market.

    Parameters
    ----------
    N : int
        Number of agents (lattice sites).
    d : int
        Lattice dimension; every neighbourhood has ``2 * d`` sites.
    alpha : float
        Coupling between the local field and the global imbalance term.
    gamma : float
        Impact asymmetry ``f(-1, N) / f(1, N)``, in ``[-1, 0)``.
    q : float
        Probability that a chosen agent follows the Hamiltonian dynamics
        rather than its expectation spin, in ``(0, 1]``.
    beta : float
        Inverse temperature. ``INFINITY`` selects the frozen phase.
    """

    N: int
    d: int
    alpha: float
    gamma: float = -0.7
    q: float = 1.0
    beta: float = INFINITY

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 2:
            raise InvalidParameter(f"N must be an integer >= 2, got {self.N!r}")
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise InvalidParameter(f"d must be a positive integer, got {self.d!r}")
        if 2 * self.d > self.N - 1:
            raise InvalidParameter(
                f"neighbourhood of size 2d={2 * self.d} needs N-1 >= 2d, got N={self.N}"
            )
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InvalidParameter(f"alpha must be finite and > 0, got {self.alpha!r}")
        if not (-1.0 <= self.gamma < 0.0):
            raise InvalidParameter(f"gamma must lie in [-1, 0), got {self.gamma!r}")
        if not (0.0 < self.q <= 1.0):
            raise InvalidParameter(f"q must lie in (0, 1], got {self.q!r}")
        if not self.beta > 0:
            raise InvalidParameter(f"beta must be > 0 or INFINITY, got {self.beta!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "d", int(self.d))

    @property
    def frozen(self) -> bool:
        return math.isinf(self.beta)

    @property
    def threshold_factor(self) -> float:
        """The factor ``1 - 1/q`` (<= 0) scaling the strategic thresholds."""
        return 1.0 - 1.0 / self.q

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)
