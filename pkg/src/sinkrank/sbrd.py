"""Perturbed strict best response dynamics over a finite memory.

One exploration phase:

1. evaluate the payoff memory, ``kappa = f(p(h))``;
2. exploration rate ``eps_bar = eps ** kappa``;
3. pick a learner ``j`` uniformly; the learner plays a best response and
   everybody else keeps their strategy, except that each agent
   independently switches to a uniformly random strategy with probability
   ``eps_bar``;
4. best responses come from the (exact or empirical) payoff table;
5. explored profiles are evaluated through the empirical game;
6. update the memory: with probability ``1 - eps_bar`` repeat ``s_tau`` if
   it is a PNE, append ``s_tau+1`` if it strictly improved the learner,
   otherwise keep the memory; with probability ``eps_bar`` append
   ``s_tau+1`` unconditionally.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .game_model import GameError, MetaGame, as_weights, best_responses
from .response_graph import SBRGraph, build_sbr_graph, sink_equilibria

_ROLES = ("agent", "explore", "uniform", "best_response", "history")


@dataclass(frozen=True)
class FeasibleFunction:
    """Exponential feasible function ``f(M) = base ** (x / delta)`` where
    ``x = (1/m) sum_j sum_i w_i M_ij``; ``base`` defaults to ``v n - n + 2``.
    """

    delta: float
    num_sinks: int
    num_agents: int
    weights: np.ndarray
    base: float | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise GameError("delta must be positive")
        object.__setattr__(self, "weights",
                           as_weights(self.weights, self.num_agents))
        if self.base is None:
            object.__setattr__(
                self, "base", float(self.num_sinks * self.num_agents - self.num_agents + 2))

    @classmethod
    def for_game(cls, meta: MetaGame, delta: float, weights=None,
                 graph: SBRGraph | None = None) -> "FeasibleFunction":
        graph = graph if graph is not None else build_sbr_graph(meta)
        return cls(delta, len(sink_equilibria(graph)), meta.num_agents,
                   as_weights(weights, meta.num_agents))

    @property
    def growth_threshold(self) -> float:
        """``f(x + delta) / f(x)`` must exceed this (``v n - n + 1``)."""
        return float(self.num_sinks * self.num_agents - self.num_agents + 1)

    def is_feasible(self) -> bool:
        return self.base > self.growth_threshold

    def of_performance(self, x: float) -> float:
        try:
            return self.base ** (x / self.delta)
        except OverflowError:
            return float("inf")

    def __call__(self, payoffs) -> float:
        p = np.asarray(payoffs, dtype=float)
        if p.ndim != 2 or p.shape[0] != self.num_agents:
            raise GameError(f"payoff memory must be {self.num_agents} x m")
        x = float(self.weights @ p.sum(axis=1)) / p.shape[1]
        return self.of_performance(x)


def feasible_eval(f: FeasibleFunction, payoffs) -> float:
    return f(payoffs)


def exploration_rate(epsilon: float, kappa: float) -> float:
    if epsilon == 0.0:
        return 0.0
    return epsilon ** kappa


@dataclass(frozen=True)
class SBRDConfig:
    epsilon: float
    memory: int
    mode: str = "exact"
    episodes: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise GameError("epsilon must lie in [0, 1)")
        if self.memory < 1:
            raise GameError("memory length must be >= 1")
        if self.mode not in ("exact", "empirical"):
            raise GameError("mode must be 'exact' or 'empirical'")


@dataclass(frozen=True)
class HistoryState:
    """Memory window of flat profile indices (``None`` = empty slot during
    warm-up) and its ``n x m`` payoff matrix, aligned columnwise."""

    window: tuple[int | None, ...]
    payoffs: np.ndarray

    @property
    def current(self) -> int:
        return self.window[-1]

    @property
    def full(self) -> bool:
        return all(s is not None for s in self.window)

    @classmethod
    def initial(cls, meta: MetaGame, m: int, profile: int) -> "HistoryState":
        """``p(h_1) = 0`` with ``s_1`` and ``J(s_1)`` stored rightmost."""
        payoffs = np.zeros((meta.num_agents, m))
        payoffs[:, -1] = meta.payoff(meta.profile(profile))
        return cls((None,) * (m - 1) + (profile,), payoffs)

    def append(self, profile: int, payoff: np.ndarray) -> "HistoryState":
        payoffs = np.concatenate([self.payoffs[:, 1:], np.asarray(payoff)[:, None]], axis=1)
        return HistoryState(self.window[1:] + (profile,), payoffs)


class Dynamics:
    """Cached per-profile quantities the dynamics needs: payoffs, best
    responses, PNE flags and the strict-improvement test.  Works lazily so an
    empirical meta-game only estimates the profiles the dynamics touches.
    Tie handling is the meta-game's own rule, shared with the SBR graph."""

    def __init__(self, meta: MetaGame):
        self.meta = meta
        self.n = meta.num_agents
        self.shape = meta.shape
        self._strides = [int(np.prod(meta.shape[i + 1:])) for i in range(self.n)]
        self.payoff = lru_cache(maxsize=None)(self._payoff)
        self.best_responses = lru_cache(maxsize=None)(self._best_responses)
        self.is_pne = lru_cache(maxsize=None)(self._is_pne)
        self._improves = lru_cache(maxsize=None)(self._improves_uncached)

    def coord(self, flat: int, agent: int) -> int:
        return (flat // self._strides[agent]) % self.shape[agent]

    def replace(self, flat: int, agent: int, k: int) -> int:
        return flat + (k - self.coord(flat, agent)) * self._strides[agent]

    def _payoff(self, flat: int) -> tuple[float, ...]:
        return tuple(float(x) for x in self.meta.payoff(self.meta.profile(flat)))

    def _improves_uncached(self, new: int, old: int, agent: int) -> bool:
        return self.meta.improves(self.meta.profile(new), self.meta.profile(old), agent)

    def improves(self, new: int, old: int, agent: int) -> bool:
        return new != old and self._improves(new, old, agent)

    def _best_responses(self, flat: int, agent: int) -> tuple[int, ...]:
        return tuple(best_responses(self.meta, agent, self.meta.profile(flat)))

    def _is_pne(self, flat: int) -> bool:
        # out-degree zero in the SBR graph
        for i in range(self.n):
            for k in self.best_responses(flat, i):
                if self.improves(self.replace(flat, i, k), flat, i):
                    return False
        return True


@dataclass(frozen=True)
class StepDraws:
    """Uniform variates consumed by one phase, one slot per role."""

    agent: float
    explore: tuple[float, ...]
    uniform: tuple[float, ...]
    best_response: float
    history: float


class DrawStreams:
    """Independent uniform streams per role, indexed by phase number.

    Stream ``role`` is seeded by ``(seed, role)`` and phase ``tau`` always
    reads the same positions, so a draw depends only on (seed, tau, role).
    """

    def __init__(self, seed: int, num_agents: int, block: int = 4096):
        self.n = num_agents
        self.block = block
        self._gens = {r: np.random.default_rng([seed, k]) for k, r in enumerate(_ROLES)}
        self._width = {"agent": 1, "explore": num_agents, "uniform": num_agents,
                       "best_response": 1, "history": 1}
        self._start = None
        self._size = 0
        self._buf = None

    def _refill(self, start: int):
        # short runs are common, so buffers start small and double up to ``block``
        self._size = min(self.block, max(64, 2 * self._size))
        self._buf = {r: self._gens[r].random((self._size, self._width[r])).tolist()
                     for r in _ROLES}
        self._start = start

    def __call__(self, tau: int) -> StepDraws:
        if self._start is None or not self._start <= tau < self._start + self._size:
            if self._start is not None and tau != self._start + self._size:
                raise ValueError("draw streams must be read in phase order")
            if self._start is None and tau != 1:
                raise ValueError("draw streams start at phase 1")
            self._refill(tau)
        k = tau - self._start
        buf = self._buf
        return StepDraws(buf["agent"][k][0], tuple(buf["explore"][k]),
                         tuple(buf["uniform"][k]), buf["best_response"][k][0],
                         buf["history"][k][0])


@dataclass(frozen=True)
class StepLog:
    kappa: float
    eps_bar: float
    agent: int
    explored: tuple[bool, ...]
    candidate: int
    clause: str     # pne-repeat | improve | unchanged | explore-append


def _phase(dyn: Dynamics, current: int, eps_bar: float, draws: StepDraws):
    """Steps 3-6 of a phase from the current profile; returns the profile to
    append (or None to keep the memory) and the log fields."""
    n = dyn.n
    j = min(int(draws.agent * n), n - 1)
    nxt = current
    explored = []
    for i in range(n):
        if draws.explore[i] < eps_bar:
            k = min(int(draws.uniform[i] * dyn.shape[i]), dyn.shape[i] - 1)
            nxt = dyn.replace(nxt, i, k)
            explored.append(True)
            continue
        explored.append(False)
        if i == j:
            brs = dyn.best_responses(current, j)
            k = brs[min(int(draws.best_response * len(brs)), len(brs) - 1)]
            nxt = dyn.replace(nxt, i, k)
    if draws.history < eps_bar:
        return nxt, nxt, j, tuple(explored), "explore-append"
    if dyn.is_pne(current):
        return current, nxt, j, tuple(explored), "pne-repeat"
    if dyn.improves(nxt, current, j):
        return nxt, nxt, j, tuple(explored), "improve"
    return None, nxt, j, tuple(explored), "unchanged"


def sbrd_step(state: HistoryState, cfg: SBRDConfig, meta: MetaGame,
              rng, f: FeasibleFunction, dyn: Dynamics | None = None):
    """Run one exploration phase.

    Args:
      state: current memory.
      cfg: perturbation level and memory settings.
      meta: the meta-game (exact or empirical payoff table).
      rng: a ``StepDraws`` for this phase or a numpy ``Generator``.
      f: feasible function used to turn the payoff memory into ``kappa``.
      dyn: optional shared cache of best responses and PNE flags.

    Returns:
      The next ``HistoryState`` and a ``StepLog``.
    """
    dyn = dyn if dyn is not None else Dynamics(meta)
    if isinstance(rng, np.random.Generator):
        n = meta.num_agents
        rng = StepDraws(float(rng.random()), tuple(rng.random(n)), tuple(rng.random(n)),
                        float(rng.random()), float(rng.random()))
    kappa = f(state.payoffs)
    eps_bar = exploration_rate(cfg.epsilon, kappa)
    add, cand, j, explored, clause = _phase(dyn, state.current, eps_bar, rng)
    log = StepLog(kappa, eps_bar, j, explored, cand, clause)
    if add is None:
        return state, log
    return state.append(add, np.array(dyn.payoff(add))), log


@dataclass
class TrajectorySummary:
    """Occupancy statistics of one or more runs (merge with ``+``)."""

    profile_visits: np.ndarray      # steps with s_tau == profile
    recorded: np.ndarray            # window slots holding the profile
    sink_visits: np.ndarray         # steps with s_tau inside sink k
    rcc_visits: np.ndarray          # steps with the whole window in RCC k
    steps: int
    final_window: tuple[int, ...] | None = None
    absorption_step: int | None = None
    exits_after_absorption: int = 0
    runs: int = 1

    def __add__(self, other: "TrajectorySummary") -> "TrajectorySummary":
        return TrajectorySummary(
            self.profile_visits + other.profile_visits, self.recorded + other.recorded,
            self.sink_visits + other.sink_visits, self.rcc_visits + other.rcc_visits,
            self.steps + other.steps, other.final_window,
            None, self.exits_after_absorption + other.exits_after_absorption,
            self.runs + other.runs)

    def frequency(self) -> np.ndarray:
        return self.profile_visits / max(self.steps, 1)

    def rcc_frequency(self) -> np.ndarray:
        return self.rcc_visits / max(self.steps, 1)


class RCCIndex:
    """Membership test ``window -> sink id`` for recurrent classes."""

    def __init__(self, graph: SBRGraph):
        self.graph = graph
        self.sinks = sink_equilibria(graph)
        self.sink_of = {}
        for q in self.sinks:
            for v in q.members:
                self.sink_of[v] = q.sink_id
        self._cache: dict[tuple[int, ...], int | None] = {}

    def __call__(self, window: tuple[int, ...]) -> int | None:
        hit = self._cache.get(window, -1)
        if hit != -1:
            return hit
        out = None
        sid = self.sink_of.get(window[0])
        if sid is not None and all(self.sink_of.get(s) == sid for s in window):
            g = self.graph
            if all((u == v and g.pne[u]) or g.has_edge(u, v)
                   for u, v in zip(window, window[1:])):
                out = sid
        self._cache[window] = out
        return out


def run_sbrd(meta: MetaGame, cfg: SBRDConfig, steps: int, f: FeasibleFunction,
             burn_in: int = 0, initial: int | Sequence[int] | None = None,
             graph: SBRGraph | None = None,
             absorbed_patience: int | None = None) -> TrajectorySummary:
    """Simulate ``steps`` phases and summarise occupancy after burn-in.

    Statistics are collected for phases ``tau > max(burn_in, m)``.  With
    ``absorbed_patience`` the run stops that many phases after the memory
    first enters a recurrent class.
    """
    if steps < 1:
        raise GameError("steps must be >= 1")
    dyn = Dynamics(meta)
    graph = graph if graph is not None else build_sbr_graph(meta)
    rcc = RCCIndex(graph)
    m = cfg.memory
    n_prof = meta.num_profiles
    if initial is None:
        init_rng = np.random.default_rng([cfg.seed, len(_ROLES)])
        initial = int(meta.index(tuple(int(init_rng.integers(k)) for k in meta.shape)))
    elif not isinstance(initial, (int, np.integer)):
        initial = meta.index(initial)
    initial = int(initial)
    draws = DrawStreams(cfg.seed, meta.num_agents)

    w = f.weights
    window: list[int | None] = [None] * (m - 1) + [initial]
    perf: list[float] = [0.0] * (m - 1) + [float(np.dot(w, dyn.payoff(initial)))]
    perf_sum = sum(perf)

    profile_visits = np.zeros(n_prof, dtype=np.int64)
    recorded = np.zeros(n_prof, dtype=np.int64)
    sink_visits = np.zeros(len(rcc.sinks), dtype=np.int64)
    rcc_visits = np.zeros(len(rcc.sinks), dtype=np.int64)
    counted = 0
    start_stats = max(burn_in, m)
    absorbed_at = None
    exits = 0
    eps = cfg.epsilon
    for tau in range(1, steps + 1):
        kappa = f.of_performance(perf_sum / m)
        eps_bar = exploration_rate(eps, kappa)
        add, *_ = _phase(dyn, window[-1], eps_bar, draws(tau))
        if add is not None:
            window.pop(0)
            window.append(add)
            perf_sum -= perf.pop(0)
            perf.append(float(np.dot(w, dyn.payoff(add))))
            perf_sum = sum(perf)
        if tau < m:
            continue
        key = tuple(window)
        cls_id = rcc(key)
        if absorbed_at is None and cls_id is not None:
            absorbed_at = tau
        elif absorbed_at is not None and cls_id is None:
            exits += 1
        if tau > start_stats:
            counted += 1
            cur = window[-1]
            profile_visits[cur] += 1
            for s in window:
                recorded[s] += 1
            sid = rcc.sink_of.get(cur)
            if sid is not None:
                sink_visits[sid] += 1
            if cls_id is not None:
                rcc_visits[cls_id] += 1
        if absorbed_patience is not None and absorbed_at is not None \
                and tau - absorbed_at >= absorbed_patience:
            break
    final = tuple(window) if all(s is not None for s in window) else None
    return TrajectorySummary(profile_visits, recorded, sink_visits, rcc_visits,
                             counted, final, absorbed_at, exits)
