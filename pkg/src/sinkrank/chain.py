"""Exact Markov-chain analysis of the perturbed dynamics over history states.

History states are windows ``h = (s_1, ..., s_m)`` of flat profile indices,
enumerated lexicographically: state ``idx`` has digits ``idx`` in base
``N = |S|`` with the rightmost digit being the current profile.  Appending
``s'`` to state ``idx`` gives ``(idx mod N^(m-1)) * N + s'``.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .game_model import GameError, MetaGame, as_weights
from .metrics import (EXACT_CYCLE_CAP, MetricReport, cycle_metric,
                      max_cycle_length_bound, memory_metric)
from .response_graph import (SBRGraph, SinkEquilibrium, build_sbr_graph,
                             node_performance, sink_equilibria)
from .sbrd import Dynamics, FeasibleFunction, exploration_rate

STATE_CAP = 20_000
DENSE_SOLVE_LIMIT = 1500
ALL_STATE_POTENTIAL_LIMIT = 1024
RESIDUAL_BOUND = 1e-10
EPS_GRID = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
SURVIVOR_MASS = 1e-3


def state_cap() -> int:
    raw = os.environ.get("SINKRANK_STATE_CAP")
    if raw is None:
        return STATE_CAP
    try:
        return int(raw)
    except ValueError:
        raise GameError(f"SINKRANK_STATE_CAP must be an integer, got {raw!r}") from None


def _check_size(num_profiles: int, m: int, cap: int | None) -> int:
    cap = state_cap() if cap is None else cap
    size = num_profiles ** m
    if size > cap:
        raise GameError(f"|S|^m = {num_profiles}^{m} = {size} exceeds the state cap {cap}")
    return size


def window_digits(num_profiles: int, m: int) -> np.ndarray:
    """All windows as an ``(N^m, m)`` array in lexicographic order."""
    return np.array(list(itertools.product(range(num_profiles), repeat=m)),
                    dtype=np.int64).reshape(-1, m)


def window_index(window: Sequence[int], num_profiles: int) -> int:
    idx = 0
    for s in window:
        idx = idx * num_profiles + int(s)
    return idx


def _kappa(meta: MetaGame, digits: np.ndarray, f: FeasibleFunction) -> np.ndarray:
    """``f(p(h))`` for every window; columns of ``p(h)`` are exact payoffs."""
    W = meta.payoff_table().reshape(-1, meta.num_agents) @ f.weights
    perf = W[digits]
    x = np.zeros(len(digits))
    for col in range(digits.shape[1]):
        x = x + perf[:, col]
    kappa = np.array([f.of_performance(v) for v in x / digits.shape[1]])
    if not np.all(np.isfinite(kappa)):
        raise GameError("f(p(h)) overflows; choose a larger delta or rescale payoffs")
    return kappa


@dataclass
class HistoryChain:
    """Perturbed dynamics as a finite chain on ``H = S^m``."""

    meta: MetaGame
    memory: int
    epsilon: float
    f: FeasibleFunction
    digits: np.ndarray
    kappa: np.ndarray
    eps_bar: np.ndarray
    transition: sp.csr_matrix

    @property
    def num_states(self) -> int:
        return self.digits.shape[0]

    def window(self, idx: int) -> tuple[int, ...]:
        return tuple(int(s) for s in self.digits[idx])

    def index(self, window: Sequence[int]) -> int:
        if len(window) != self.memory:
            raise GameError(f"window must have {self.memory} profiles")
        return window_index(window, self.meta.num_profiles)

    def label(self, idx: int) -> str:
        return "|".join(f"({self.meta.label(s)})" for s in self.window(idx))


def step_distribution(dyn: Dynamics, s: int, eps_bar: float):
    """Next-profile masses for one phase from current profile ``s``.

    Returns ``(A, B, D)``: ``A[s']`` is the mass appended through the strict
    improvement clause, ``B[s']`` the candidate distribution (used when the
    history explores) and ``D`` the total mass of non-improving candidates.
    """
    n = dyn.n
    N = int(np.prod(dyn.shape))
    A = np.zeros(N)
    B = np.zeros(N)
    D = 0.0
    pne = dyn.is_pne(s)
    for j in range(n):
        factors = []
        for i in range(n):
            size = dyn.shape[i]
            vec = np.full(size, eps_bar / size)
            if i == j:
                brs = dyn.best_responses(s, j)
                vec[list(brs)] += (1.0 - eps_bar) / len(brs)
            else:
                vec[dyn.coord(s, i)] += 1.0 - eps_bar
            factors.append(vec)
        joint = factors[0]
        for vec in factors[1:]:
            joint = np.multiply.outer(joint, vec)
        joint = joint.reshape(-1) / n
        B += joint
        if pne:
            continue
        improve = np.array([dyn.improves(t, s, j) for t in range(N)])
        A += np.where(improve, joint, 0.0)
        D += float(joint[~improve].sum())
    return A, B, D


def enumerate_history_chain(meta: MetaGame, m: int, epsilon: float,
                            f: FeasibleFunction, cap: int | None = None) -> HistoryChain:
    """Exact transition matrix of the perturbed dynamics on ``S^m``.

    For a PNE ``s`` the memory appends ``s`` with probability ``1 - eps_bar``
    and a fresh candidate otherwise.  For other profiles the candidate is
    appended when it strictly improves the learner or when the history
    explores, and the memory stays put otherwise.
    """
    if not 0.0 <= epsilon < 1.0:
        raise GameError("epsilon must lie in [0, 1)")
    N = meta.num_profiles
    size = _check_size(N, m, cap)
    dyn = Dynamics(meta)
    digits = window_digits(N, m)
    kappa = _kappa(meta, digits, f)
    eps_bar = np.array([exploration_rate(epsilon, k) for k in kappa])
    shift = N ** (m - 1)
    rows, cols, vals = [], [], []
    cache: dict[tuple[int, float], tuple] = {}
    targets = np.arange(N)
    for idx in range(size):
        s = int(digits[idx, -1])
        e_bar = float(eps_bar[idx])
        key = (s, e_bar)
        if key not in cache:
            cache[key] = step_distribution(dyn, s, e_bar)
        A, B, D = cache[key]
        base = (idx % shift) * N
        if dyn.is_pne(s):
            row = e_bar * B
            row[s] += 1.0 - e_bar
        else:
            row = (1.0 - e_bar) * A + e_bar * B
        rows.append(np.full(N, idx))
        cols.append(base + targets)
        vals.append(row)
        if not dyn.is_pne(s) and D > 0:
            rows.append(np.array([idx]))
            cols.append(np.array([idx]))
            vals.append(np.array([(1.0 - e_bar) * D]))
    P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size)).tocsr()
    P.eliminate_zeros()
    sums = np.asarray(P.sum(axis=1)).ravel()
    if np.max(np.abs(sums - 1.0)) > 1e-12:
        raise AssertionError("transition rows do not sum to 1")
    return HistoryChain(meta, m, epsilon, f, digits, kappa, eps_bar, P)


# stationary distributions ----------------------------------------------------

def gth_stationary(P: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman elimination (no subtractions, so stiff
    chains with tiny transition probabilities keep full relative accuracy)."""
    A = np.array(P, dtype=float)
    n = A.shape[0]
    np.fill_diagonal(A, 0.0)
    for k in range(n - 1, 0, -1):
        out = A[k, :k].sum()
        if out <= 0.0:
            raise GameError("chain is reducible; no unique stationary distribution")
        A[:k, k] /= out
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def stationary_residual(P, pi: np.ndarray) -> float:
    return float(np.max(np.abs(P.T @ pi - pi)))


def stationary_distribution(chain: HistoryChain | sp.spmatrix | np.ndarray) -> np.ndarray:
    """Unique stationary distribution of an irreducible chain.

    Small chains use GTH elimination; larger ones a sparse LU solve with the
    normalisation replacing one balance equation.  The residual
    ``max |pi P - pi|`` is checked against 1e-10.
    """
    if isinstance(chain, HistoryChain):
        if chain.epsilon <= 0.0:
            raise GameError("the epsilon = 0 chain is reducible; stationary "
                            "distribution is not unique")
        if np.any(chain.eps_bar <= 0.0):
            raise GameError("eps ** f(p(h)) underflows to 0; use a larger epsilon "
                            "or a smaller feasible function")
        P = chain.transition
    else:
        P = chain
    n = P.shape[0]
    if n <= DENSE_SOLVE_LIMIT:
        dense = P.toarray() if sp.issparse(P) else np.asarray(P, dtype=float)
        pi = gth_stationary(dense)
    else:
        P = sp.csr_matrix(P)
        M = (P.T - sp.identity(n, format="csr")).tolil()
        M[0, :] = np.ones(n)
        rhs = np.zeros(n)
        rhs[0] = 1.0
        pi = spla.spsolve(M.tocsc(), rhs)
        pi = np.clip(pi, 0.0, None)
        pi = pi / pi.sum()
    res = stationary_residual(P, pi)
    if res > RESIDUAL_BOUND:
        raise GameError(f"stationary residual {res:.3g} exceeds {RESIDUAL_BOUND}")
    return pi


# exploration numbers and resistances ------------------------------------------

def exploration_number(meta: MetaGame, s, s2, dyn: Dynamics | None = None) -> int:
    """Fewest explorations (agents plus the history update) that turn a
    memory ending in ``s`` into one ending in ``s2``."""
    dyn = dyn if dyn is not None else Dynamics(meta)
    s = s if isinstance(s, (int, np.integer)) else meta.index(s)
    s2 = s2 if isinstance(s2, (int, np.integer)) else meta.index(s2)
    s, s2 = int(s), int(s2)
    pne = dyn.is_pne(s)
    if pne and s == s2:
        return 0
    best = None
    for j in range(dyn.n):
        count = sum(1 for i in range(dyn.n)
                    if i != j and dyn.coord(s2, i) != dyn.coord(s, i))
        if dyn.coord(s2, j) not in dyn.best_responses(s, j):
            count += 1
        if pne or not dyn.improves(s2, s, j):
            count += 1
        best = count if best is None else min(best, count)
    return best


def exploration_matrix(meta: MetaGame, dyn: Dynamics | None = None) -> np.ndarray:
    dyn = dyn if dyn is not None else Dynamics(meta)
    N = meta.num_profiles
    return np.array([[exploration_number(meta, s, t, dyn) for t in range(N)]
                     for s in range(N)], dtype=float)


def _stay_resistance(dyn: Dynamics, s: int) -> float:
    """Explorations needed for the memory to stay unchanged."""
    if dyn.is_pne(s):
        return math.inf
    if any(dyn.coord(s, j) in dyn.best_responses(s, j) for j in range(dyn.n)):
        return 0.0
    return 1.0


@dataclass
class ResistanceGraph:
    """Finite-resistance transitions between distinct history states plus
    the self-loop resistance of every state."""

    num_profiles: int
    memory: int
    kappa: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    resistance: np.ndarray
    self_loop: np.ndarray

    @property
    def num_states(self) -> int:
        return len(self.kappa)

    def r(self, h: int, h2: int) -> float:
        """``r(h, h')``; infinite when ``h'`` does not extend ``h``'s overlap."""
        if h == h2:
            return float(self.self_loop[h])
        N = self.num_profiles
        if (h % N ** (self.memory - 1)) != h2 // N:
            return math.inf
        k = h * N + (h2 % N)
        k = int(np.searchsorted(self._keys, k))
        if k < len(self._keys) and self._keys[k] == h * N + (h2 % N):
            return float(self.resistance[self._order[k]])
        return math.inf

    def __post_init__(self):
        keys = self.src * self.num_profiles + (self.dst % self.num_profiles)
        self._order = np.argsort(keys, kind="stable")
        self._keys = keys[self._order]


def resistance_graph(meta: MetaGame, m: int, f: FeasibleFunction,
                     cap: int | None = None, dyn: Dynamics | None = None) -> ResistanceGraph:
    """``r(h, h') = e(s, s') f(p(h))`` for every ``h' = (h^R, s')``."""
    N = meta.num_profiles
    size = _check_size(N, m, cap)
    dyn = dyn if dyn is not None else Dynamics(meta)
    digits = window_digits(N, m)
    kappa = _kappa(meta, digits, f)
    E = exploration_matrix(meta, dyn)
    idx = np.arange(size)
    cur = digits[:, -1]
    base = (idx % N ** (m - 1)) * N
    dst = base[:, None] + np.arange(N)[None, :]
    res = E[cur] * kappa[:, None]
    src = np.repeat(idx, N)
    dst = dst.ravel()
    res = res.ravel()
    keep = src != dst
    stay = np.array([_stay_resistance(dyn, int(s)) for s in range(N)])
    loop = stay[cur] * kappa
    loop = np.where(np.isnan(loop), np.inf, loop)
    constant = np.all(digits == cur[:, None], axis=1)
    loop[constant] = np.minimum(loop[constant], E[cur[constant], cur[constant]] * kappa[constant])
    return ResistanceGraph(N, m, kappa, src[keep], dst[keep], res[keep], loop)


# minimum arborescences ----------------------------------------------------------

def min_arborescence_cost(num_nodes: int, src, dst, weight, root: int) -> float:
    """Cost of a minimum spanning out-arborescence rooted at ``root``
    (Chu-Liu/Edmonds with cycle contraction).

    Raises:
      GameError: if some node cannot be reached from the root.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    w = np.asarray(weight, dtype=float)
    keep = np.isfinite(w) & (src != dst) & (dst != root)
    src, dst, w = src[keep], dst[keep], w[keep]
    n = num_nodes
    total = 0.0
    while True:
        order = np.lexsort((w, dst))
        first = np.ones(len(order), dtype=bool)
        first[1:] = dst[order][1:] != dst[order][:-1]
        pick = order[first]
        in_w = np.full(n, np.inf)
        parent = np.full(n, -1, dtype=np.int64)
        in_w[dst[pick]] = w[pick]
        parent[dst[pick]] = src[pick]
        in_w[root] = 0.0
        missing = np.flatnonzero(~np.isfinite(in_w))
        if len(missing):
            raise GameError(f"node {int(missing[0])} is unreachable; no spanning arborescence")
        total += float(in_w.sum())
        comp = np.full(n, -1, dtype=np.int64)
        seen = np.full(n, -1, dtype=np.int64)
        count = 0
        for v in range(n):
            u = v
            while u != root and seen[u] == -1 and comp[u] == -1:
                seen[u] = v
                u = parent[u]
            if u != root and seen[u] == v and comp[u] == -1:
                x = parent[u]
                comp[u] = count
                while x != u:
                    comp[x] = count
                    x = parent[x]
                count += 1
        if count == 0:
            return total
        for v in range(n):
            if comp[v] == -1:
                comp[v] = count
                count += 1
        w = w - in_w[dst]
        src, dst = comp[src], comp[dst]
        root = int(comp[root])
        keep = (src != dst) & (dst != root)
        src, dst, w = src[keep], dst[keep], w[keep]
        n = count


def in_tree_cost(num_nodes: int, src, dst, resistance, root: int) -> float:
    """Cheapest spanning tree whose edges all lead towards ``root``; solved
    as an out-arborescence on the reversed graph."""
    return min_arborescence_cost(num_nodes, dst, src, resistance, int(root))


def stochastic_potential(rg: ResistanceGraph, h: int) -> float:
    """Minimum total resistance of a spanning tree directed into ``h``."""
    return in_tree_cost(rg.num_states, rg.src, rg.dst, rg.resistance, h)


# recurrent communication classes ---------------------------------------------------

@dataclass(frozen=True)
class RCC:
    """Length-``m`` SBRP windows inside one sink equilibrium."""

    sink_id: int
    windows: tuple[tuple[int, ...], ...]
    performance: float | None = None

    def __len__(self) -> int:
        return len(self.windows)

    def states(self, num_profiles: int) -> list[int]:
        return [window_index(w, num_profiles) for w in self.windows]


def rcc_of_sink(graph: SBRGraph, q: SinkEquilibrium, m: int, node_weights=None,
                cap: int | None = None) -> RCC:
    """All SBRP windows of length ``m`` lying inside sink ``q``.

    ``performance`` is ``min_h W(h)`` with ``W(h)`` the mean node weight of
    the window, summed left to right.
    """
    if m < 1:
        raise GameError("memory length must be >= 1")
    cap = state_cap() if cap is None else cap
    sub = q.subgraph(graph)
    nxt = {u: ([u] if graph.pne[u] else sub[u]) for u in q.members}
    windows: list[tuple[int, ...]] = []
    stack = [(u,) for u in reversed(q.members)]
    while stack:
        path = stack.pop()
        if len(path) == m:
            windows.append(path)
            if len(windows) > cap:
                raise GameError(f"RCC of sink {q.sink_id} exceeds {cap} windows")
            continue
        for v in reversed(nxt[path[-1]]):
            stack.append(path + (v,))
    windows.sort()
    perf = None
    if node_weights is not None:
        perf = min(sum(float(node_weights[v]) for v in w) / m for w in windows)
    return RCC(q.sink_id, tuple(windows), perf)


def decompose_window(window: Sequence[int]) -> tuple[list[list[int]], list[int]]:
    """Peel directed cycles off a window.

    Walk the window keeping a simple path; whenever a profile repeats, the
    segment since its previous occurrence is split off as a cycle (a PNE
    repetition gives a cycle of length one).  Returns the cycles and the
    cycle-free remainder; their lengths add up to ``len(window)``.
    """
    cycles: list[list[int]] = []
    path: list[int] = []
    for s in window:
        if s in path:
            t = path.index(s)
            cycles.append(path[t:])
            path = path[:t + 1]
        else:
            path.append(s)
    return cycles, path


# stochastic stability ----------------------------------------------------------------

@dataclass
class StabilityReport:
    """Potentials, stable states and the stationary masses along an epsilon grid."""

    gamma: dict[int, float]
    stable_states: list[int]
    stable_sinks: list[int]
    rccs: list[RCC]
    rcc_states: list[list[int]]
    epsilon_grid: tuple[float, ...]
    stationary: list[np.ndarray] = field(repr=False)
    rcc_mass: np.ndarray = field(repr=False)          # (grid, rcc)
    extrapolated: np.ndarray = field(repr=False)
    survivors: list[int] = field(default_factory=list)
    grid_agrees: bool = True
    gamma_equal_on_rcc: bool | None = None
    gamma_within_bounds: bool | None = None
    gamma_bar: list[float] = field(default_factory=list)
    num_agents: int = 0


def extrapolate_to_zero(grid: Sequence[float], values: Sequence[np.ndarray]) -> np.ndarray:
    """Linear extrapolation to ``eps = 0`` from the two smallest grid points."""
    order = np.argsort(grid)
    e1, e2 = grid[order[0]], grid[order[1]]
    v1, v2 = np.asarray(values[order[0]]), np.asarray(values[order[1]])
    out = v1 - e1 * (v2 - v1) / (e2 - e1)
    return np.clip(out, 0.0, None)


def stochastically_stable(meta: MetaGame, m: int, f: FeasibleFunction,
                          graph: SBRGraph | None = None,
                          eps_grid: Sequence[float] = EPS_GRID,
                          all_states: bool | None = None,
                          cap: int | None = None) -> StabilityReport:
    """Stochastically stable history states by minimum stochastic potential,
    cross-checked against stationary distributions on a shrinking epsilon
    grid.

    Potentials are computed for every state when ``|H|`` is at most 1024
    (or ``all_states=True``), otherwise only for RCC members; states outside
    every RCC are never stable, so the argmin is unaffected.
    """
    graph = graph if graph is not None else build_sbr_graph(meta)
    N = meta.num_profiles
    dyn = Dynamics(meta)
    rg = resistance_graph(meta, m, f, cap, dyn)
    W = node_performance(graph, f.weights)
    sinks = sink_equilibria(graph)
    rccs = [rcc_of_sink(graph, q, m, W, cap) for q in sinks]
    rcc_states = [r.states(N) for r in rccs]
    if all_states is None:
        all_states = rg.num_states <= ALL_STATE_POTENTIAL_LIMIT
    todo = range(rg.num_states) if all_states else sorted(
        {h for states in rcc_states for h in states})
    gamma = {h: stochastic_potential(rg, h) for h in todo}
    low = min(gamma.values())
    tol = 1e-9 * max(1.0, abs(low))
    stable = sorted(h for h, g in gamma.items() if g <= low + tol)
    stable_set = set(stable)
    stable_sinks = [k for k, states in enumerate(rcc_states) if stable_set & set(states)]

    pis, mass = [], []
    for eps in eps_grid:
        pi = stationary_distribution(enumerate_history_chain(meta, m, eps, f, cap))
        pis.append(pi)
        mass.append([float(pi[states].sum()) for states in rcc_states])
    extrap = extrapolate_to_zero(list(eps_grid), pis)
    survivors = [int(h) for h in np.flatnonzero(extrap > SURVIVOR_MASS)]

    # potentials are constant on each RCC and bracketed by gamma_bar
    kappa_min = [min(float(rg.kappa[h]) for h in states) for states in rcc_states]
    gamma_bar = [sum(k for j, k in enumerate(kappa_min) if j != i)
                 for i in range(len(rccs))]
    equal = bounds = True
    n = meta.num_agents
    for i, states in enumerate(rcc_states):
        vals = [gamma[h] for h in states]
        if max(vals) - min(vals) > 1e-12:
            equal = False
        slack = 1e-9 * max(1.0, gamma_bar[i])
        if min(vals) < gamma_bar[i] - slack or max(vals) > (n + 1) * gamma_bar[i] + slack:
            bounds = False
    return StabilityReport(gamma, stable, stable_sinks, rccs, rcc_states,
                           tuple(eps_grid), pis, np.array(mass), extrap, survivors,
                           set(survivors) == stable_set, equal, bounds, gamma_bar, n)


# theorem verification -------------------------------------------------------------------

@dataclass
class VerdictReport:
    kind: str
    status: str                      # pass | fail | precondition
    messages: list[str]
    checks: dict[str, bool | None]
    values: dict[str, object]

    @property
    def exit_code(self) -> int:
        return {"pass": 0, "fail": 1, "precondition": 2}[self.status]


def memory_bound(L: int, j_max: float, gap: float, factor: float = 2.0) -> float:
    """``factor * L * J_max / gap``; the memory needed for the cycle metric."""
    if gap <= 0:
        raise GameError("gap must be positive")
    return factor * L * j_max / gap


def verify_theorems(meta: MetaGame, kind: str, delta: float, m: int,
                    delta0: float | None = None, delta_bar: float | None = None,
                    weights=None, eps_grid: Sequence[float] = EPS_GRID,
                    cap: int | None = None) -> VerdictReport:
    """Check the preconditions of the stability theorems on one instance and
    compare their predictions with the exact chain.

    With ``delta0`` the strict-gap theorems are checked (the stable set must
    be exactly the RCC of the best sink).  Without it the approximation
    theorems are checked against ``delta_bar``: every surviving state must
    sit in a sink whose metric is within ``delta_bar`` of the best.
    """
    if kind not in ("cycle", "memory"):
        raise GameError(f"unknown metric kind {kind!r}")
    w = as_weights(weights, meta.num_agents)
    messages: list[str] = []
    checks: dict[str, bool | None] = {}
    values: dict[str, object] = {"delta": delta, "memory": m, "delta0": delta0,
                                 "delta_bar": delta_bar}

    def done(status):
        return VerdictReport(kind, status, messages, checks, values)

    table = meta.payoff_table()
    if np.any(table < 0):
        messages.append("payoffs must be non-negative")
        return done("precondition")
    j_max = float(table.max())
    graph = build_sbr_graph(meta)
    sinks = sink_equilibria(graph)
    W = node_performance(graph, w)
    cyc: MetricReport = cycle_metric(graph, sinks, W, EXACT_CYCLE_CAP)
    mem: MetricReport = memory_metric(graph, sinks, m, W)
    report = cyc if kind == "cycle" else mem
    L = max(max_cycle_length_bound(graph, q) for q in sinks)
    metric = list(report.sink_values)
    values.update(j_max=j_max, L=L, sink_metric=metric, num_sinks=len(sinks))
    best = report.best_sinks(1e-12)
    if len(best) != 1:
        messages.append(f"sinks {best} tie for the maximum metric")
        checks["unique_max_sink"] = False
        return done("precondition")
    star = best[0]
    values["best_sink"] = star
    top = metric[star]
    if not delta > 0:
        messages.append("delta must be positive")
        return done("precondition")

    if delta0 is not None:
        others = [v for k, v in enumerate(metric) if k != star]
        gap = top - max(others) if others else math.inf
        values["gap"] = gap
        if gap < delta0:
            messages.append(f"metric gap {gap:.6g} is below delta0 = {delta0}")
            return done("precondition")
        if not delta < delta0:
            messages.append(f"delta = {delta} must be below delta0 = {delta0}")
            return done("precondition")
        bound_gap, threshold = delta0 - delta, top
    else:
        if delta_bar is None:
            raise GameError("need delta0 or delta_bar")
        if not delta < delta_bar:
            messages.append(f"delta = {delta} must be below delta_bar = {delta_bar}")
            return done("precondition")
        bound_gap, threshold = delta_bar - delta, top - delta_bar
    if kind == "cycle":
        m_bar = memory_bound(L, j_max, bound_gap)
        values["m_bar"] = m_bar
        if m < m_bar:
            messages.append(f"memory m = {m} is below the required m_bar = {m_bar:.6g}")
            return done("precondition")

    f = FeasibleFunction(delta, len(sinks), meta.num_agents, w)
    checks["feasible_function"] = f.is_feasible()
    stab = stochastically_stable(meta, m, f, graph, eps_grid, cap=cap)
    star_states = set(stab.rcc_states[star])
    good = {k for k, v in enumerate(metric) if v >= threshold - 1e-12}
    good_states = {h for k in good for h in stab.rcc_states[k]}
    values.update(stable_sinks=stab.stable_sinks, survivors=len(stab.survivors),
                  gamma_rcc=[min(stab.gamma[h] for h in st) for st in stab.rcc_states],
                  rcc_mass=stab.rcc_mass.tolist())
    if delta0 is not None:
        checks["stable_set_is_best_rcc"] = set(stab.stable_states) == star_states
        col = stab.rcc_mass[:, star]
        order = np.argsort(-np.asarray(eps_grid))
        checks["best_rcc_mass_monotone"] = bool(np.all(np.diff(col[order]) >= -1e-12))
    else:
        checks["stable_set_near_optimal"] = set(stab.stable_states) <= good_states
    prof_metric = report.profile_values
    digits = window_digits(meta.num_profiles, m)
    survivor_profiles = {int(s) for h in stab.survivors for s in digits[h]}
    checks["survivors_near_optimal"] = all(
        prof_metric[s] >= threshold - 1e-12 for s in survivor_profiles)
    checks["grid_matches_potential"] = stab.grid_agrees

    # Memory-window facts linking windows to the metrics.
    rcc_perf = [r.performance for r in stab.rccs]
    checks["rcc_equals_memory_metric"] = all(
        p == v for p, v in zip(rcc_perf, mem.sink_values))
    if m >= L * j_max / delta:
        checks["rcc_within_delta_of_cycle_metric"] = all(
            abs(p - v) <= delta + 1e-12 for p, v in zip(rcc_perf, cyc.sink_values))
    else:
        checks["rcc_within_delta_of_cycle_metric"] = None
    checks["rcc_equal_potential"] = stab.gamma_equal_on_rcc
    checks["rcc_potential_bounds"] = stab.gamma_within_bounds
    failed = [k for k, v in checks.items() if v is False]
    if failed:
        messages.append("failed: " + ", ".join(failed))
        return done("fail")
    return done("pass")
