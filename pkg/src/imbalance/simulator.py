"""Seeded Monte Carlo of the two-dimensional spin market.

The simulator runs the jump chain of the continuous-time process: the holding
times are Exp(1) at every state, so epoch counts give the same occupation law
as continuous time.  Each epoch

1. picks a site ``J`` uniformly;
2. with probability ``q`` applies the Hamiltonian rule using a freshly drawn
   neighbourhood of ``2d`` distinct sites from ``Y \\ {J}``, otherwise copies
   ``eta2`` at the pre-move imbalance level;
3. moves the price by ``P * f(X, N)`` and credits ``eta1(y) * dP`` to every
   agent except ``J``;
4. updates every expectation spin ``eta2`` synchronously.

Random numbers come from ``numpy.random.Generator(PCG64(seed))`` in fixed-width
blocks per epoch, so :func:`step` and :func:`run` consume identical streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .attractors import classify, lambda_stay_table
from .kernel import build_kernel
from .params import InvalidParameter, ModelParams
from .wealth import ImpactFunction

__all__ = ["MarketState", "SimConfig", "Trajectory", "initial_state", "run", "step"]

RNG_ALGORITHM = "numpy.random.PCG64"
RECOUNT_EVERY = 100_000
CHUNK = 8192


@dataclass
class SimConfig:
    params: ModelParams
    epochs: int
    seed: int = 0
    impact: ImpactFunction | None = None
    initial_eta1: object = "random"  # "random" | "plus" | "minus" | array of N
    initial_eta2: object = "random"  # "random" | "plus" | "minus" | array of N+1
    initial_price: float = 1.0
    initial_capital: float = 0.0
    record: frozenset = frozenset({"hist"})
    path_stride: int = 1
    eta2_trace_epochs: int = 1000

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise InvalidParameter(f"epochs must be a positive integer, got {self.epochs!r}")
        if not self.initial_price > 0:
            raise InvalidParameter("initial price must be > 0")
        if self.path_stride < 1:
            raise InvalidParameter("path_stride must be >= 1")
        if self.impact is None:
            # a unit impact would double the price on every buy
            self.impact = ImpactFunction.for_params(self.params, f_plus=1.0 / self.params.N)
        unknown = set(self.record) - {"hist", "path", "eta2", "wealth"}
        if unknown:
            raise InvalidParameter(f"unknown record flags {sorted(unknown)}")
        self.record = frozenset(self.record)


@dataclass
class MarketState:
    eta1: np.ndarray          # int8, N sites
    eta2: np.ndarray          # int8, one expectation spin per level 0..N
    n_plus: int
    price: float
    wealth: np.ndarray        # float64 per agent
    aggregate_wealth: float
    epoch: int
    pool: np.ndarray          # permutation of 0..N-2 used for neighbour draws
    rng: np.random.Generator = field(repr=False)

    def copy(self) -> "MarketState":
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = self.rng.bit_generator.state
        return replace(self, eta1=self.eta1.copy(), eta2=self.eta2.copy(),
                       wealth=self.wealth.copy(), pool=self.pool.copy(), rng=rng)


def _spins(spec, n, rng, name):
    if isinstance(spec, str):
        if spec == "random":
            return np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
        if spec == "plus":
            return np.ones(n, dtype=np.int8)
        if spec == "minus":
            return -np.ones(n, dtype=np.int8)
        raise InvalidParameter(f"unknown {name} keyword {spec!r}")
    arr = np.asarray(spec)
    if arr.shape != (n,) or not np.all(np.abs(arr) == 1):
        raise InvalidParameter(f"{name} must be {n} entries of +1/-1")
    return arr.astype(np.int8)


def initial_state(config: SimConfig) -> MarketState:
    N = config.params.N
    rng = np.random.Generator(np.random.PCG64(config.seed))
    eta1 = _spins(config.initial_eta1, N, rng, "initial_eta1")
    eta2 = _spins(config.initial_eta2, N + 1, rng, "initial_eta2")
    return MarketState(
        eta1=eta1, eta2=eta2, n_plus=int(np.sum(eta1 == 1)),
        price=float(config.initial_price),
        wealth=np.full(N, float(config.initial_capital)),
        aggregate_wealth=float(config.initial_capital) * N,
        epoch=0, pool=np.arange(N - 1, dtype=np.int64), rng=rng,
    )


class _Tables:
    """Per-config constants shared by step and run."""

    def __init__(self, config: SimConfig):
        p = config.params
        self.frozen = p.frozen
        if p.frozen:
            cls = classify(build_kernel(p))
            self.stay_p = cls.in_B.astype(np.float64)
            self.stay_m = cls.in_C.astype(np.float64)
        else:
            self.stay_p, self.stay_m = lambda_stay_table(p)
        self.width = 3 + 2 * p.d + (0 if p.frozen else p.N + 1)
        imp = config.impact
        self.f_up = imp.f_plus
        self.f_down = imp.gamma * imp.f_plus


def _flip_up_probability(beta, h):
    z = -2.0 * beta * h
    if z > 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


def step(state: MarketState, config: SimConfig, _tables: _Tables | None = None) -> MarketState:
    """Advance one epoch; returns a new state and leaves ``state`` untouched."""
    t = _tables or _Tables(config)
    p = config.params
    N, d = p.N, p.d
    s = state.copy()
    u = s.rng.random(t.width)
    i = s.n_plus
    J = min(int(u[0] * N), N - 1)
    old = int(s.eta1[J])
    if u[1] < p.q:
        total = 0
        for k in range(2 * d):
            r = k + min(int(u[3 + k] * (N - 1 - k)), N - 2 - k)
            s.pool[k], s.pool[r] = s.pool[r], s.pool[k]
            nb = int(s.pool[k])
            total += int(s.eta1[nb if nb < J else nb + 1])
        h = total - p.alpha * old * abs(2 * i - N) / N
        if t.frozen:
            new = old if h == 0 else (1 if h > 0 else -1)
        else:
            new = 1 if u[2] < _flip_up_probability(p.beta, h) else -1
    else:
        new = int(s.eta2[i])
    x = (new - old) // 2
    dp = 0.0
    if x == 1:
        dp = s.price * t.f_up
    elif x == -1:
        dp = s.price * t.f_down
    if dp != 0.0:
        s.wealth += s.eta1 * dp
        s.wealth[J] -= old * dp
        s.aggregate_wealth += dp * (2 * i - N + x)
        s.price += dp
    s.eta1[J] = new
    s.n_plus = i + x
    _update_eta2(s.eta2, t, u[3 + 2 * d:])
    s.epoch += 1
    return s


def _update_eta2(eta2, t, u_levels):
    for lvl in range(eta2.size):
        stay = t.stay_p[lvl] if eta2[lvl] == 1 else t.stay_m[lvl]
        if t.frozen:
            keep = stay > 0.5
        else:
            keep = u_levels[lvl] < stay
        if not keep:
            eta2[lvl] = -eta2[lvl]


@njit(cache=True)
def _run_chunk(u, eta1, eta2, pool, wealth, fstate, istate,
               N, d, alpha, q, beta, frozen, f_up, f_down, stay_p, stay_m,
               track_wealth, hist, trace, path, path_stride, recount_every):
    # fstate = [price, aggregate]; istate = [n_plus, epoch, trace_rows, path_rows, bad_recount]
    price = fstate[0]
    agg = fstate[1]
    n_plus = istate[0]
    epoch = istate[1]
    L = N + 1
    for row in range(u.shape[0]):
        i = n_plus
        J = int(u[row, 0] * N)
        if J > N - 1:
            J = N - 1
        old = eta1[J]
        if u[row, 1] < q:
            total = 0
            for k in range(2 * d):
                off = int(u[row, 3 + k] * (N - 1 - k))
                if off > N - 2 - k:
                    off = N - 2 - k
                r = k + off
                tmp = pool[k]
                pool[k] = pool[r]
                pool[r] = tmp
                nb = pool[k]
                if nb >= J:
                    nb += 1
                total += eta1[nb]
            h = total - alpha * old * abs(2 * i - N) / N
            if frozen:
                if h > 0:
                    new = 1
                elif h < 0:
                    new = -1
                else:
                    new = old
            else:
                z = -2.0 * beta * h
                if z > 0:
                    e = math.exp(-z)
                    pu = e / (1.0 + e)
                else:
                    pu = 1.0 / (1.0 + math.exp(z))
                new = 1 if u[row, 2] < pu else -1
        else:
            new = eta2[i]
        x = (new - old) // 2
        dp = 0.0
        if x == 1:
            dp = price * f_up
        elif x == -1:
            dp = price * f_down
        if dp != 0.0:
            if track_wealth:
                for y in range(N):
                    wealth[y] += eta1[y] * dp
                wealth[J] -= old * dp
            agg += dp * (2 * i - N + x)
            price += dp
        eta1[J] = new
        n_plus = i + x
        base = 3 + 2 * d
        for lvl in range(L):
            if eta2[lvl] == 1:
                stay = stay_p[lvl]
            else:
                stay = stay_m[lvl]
            if frozen:
                keep = stay > 0.5
            else:
                keep = u[row, base + lvl] < stay
            if not keep:
                eta2[lvl] = -eta2[lvl]
        epoch += 1
        hist[n_plus] += 1
        if istate[2] < trace.shape[0]:
            for lvl in range(L):
                trace[istate[2], lvl] = eta2[lvl]
            istate[2] += 1
        if path.shape[0] > 0 and epoch % path_stride == 0 and istate[3] < path.shape[0]:
            path[istate[3], 0] = epoch
            path[istate[3], 1] = n_plus
            path[istate[3], 2] = price
            path[istate[3], 3] = agg
            istate[3] += 1
        if epoch % recount_every == 0:
            c = 0
            for y in range(N):
                if eta1[y] == 1:
                    c += 1
            if c != n_plus:
                istate[4] += 1
    fstate[0] = price
    fstate[1] = agg
    istate[0] = n_plus
    istate[1] = epoch


@dataclass
class Trajectory:
    config: SimConfig
    histogram: np.ndarray
    final_state: MarketState
    eta2_trace: np.ndarray | None = None   # row 0 is the initial eta2
    path: np.ndarray | None = None         # columns: epoch, n_plus, price, aggregate wealth
    recounts: int = 0

    @property
    def occupation(self) -> np.ndarray:
        return self.histogram / self.histogram.sum()

    def summary(self) -> dict:
        occ = self.occupation
        return {
            "epochs": int(self.histogram.sum()),
            "seed": int(self.config.seed),
            "rng": RNG_ALGORITHM,
            "mean_n_plus": float(np.dot(np.arange(occ.size), occ)),
            "final_n_plus": int(self.final_state.n_plus),
            "final_price": float(self.final_state.price),
            "aggregate_wealth": float(self.final_state.aggregate_wealth),
            "recount_checks": int(self.recounts),
        }


def run(config: SimConfig) -> Trajectory:
    """Simulate ``config.epochs`` epochs; deterministic given the seed."""
    p = config.params
    t = _Tables(config)
    state = initial_state(config)
    N = p.N
    hist = np.zeros(N + 1, dtype=np.int64)
    n_trace = min(config.eta2_trace_epochs, config.epochs) if "eta2" in config.record else 0
    trace = np.zeros((n_trace, N + 1), dtype=np.int8)
    n_path = config.epochs // config.path_stride if "path" in config.record else 0
    path = np.zeros((n_path, 4))
    fstate = np.array([state.price, state.aggregate_wealth])
    istate = np.array([state.n_plus, 0, 0, 0, 0], dtype=np.int64)
    eta1 = state.eta1.astype(np.int64)
    eta2 = state.eta2.astype(np.int64)
    init_eta2 = state.eta2.copy()
    track = "wealth" in config.record
    beta = 0.0 if p.frozen else float(p.beta)
    remaining = int(config.epochs)
    while remaining:
        n = min(CHUNK, remaining)
        u = state.rng.random((n, t.width))
        _run_chunk(u, eta1, eta2, state.pool, state.wealth, fstate, istate,
                   N, p.d, float(p.alpha), float(p.q), beta, p.frozen,
                   t.f_up, t.f_down, t.stay_p, t.stay_m, track,
                   hist, trace, path, config.path_stride, RECOUNT_EVERY)
        remaining -= n
    if istate[4]:
        raise RuntimeError(f"n_plus drifted from the spin count {int(istate[4])} times")
    state.eta1 = eta1.astype(np.int8)
    state.eta2 = eta2.astype(np.int8)
    state.price, state.aggregate_wealth = float(fstate[0]), float(fstate[1])
    state.n_plus, state.epoch = int(istate[0]), int(istate[1])
    if not track:
        state.wealth = np.full(N, np.nan)
    trace_out = np.vstack([init_eta2[None, :], trace]) if n_trace else None
    return Trajectory(config=config, histogram=hist, final_state=state,
                      eta2_trace=trace_out, path=path if n_path else None,
                      recounts=int(config.epochs // RECOUNT_EVERY))
