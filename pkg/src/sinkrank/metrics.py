"""Performance measures, cycle- and memory-based metrics, and rankings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game_model import GameError, MetaGame, as_weights
from .response_graph import (SBRGraph, SinkEquilibrium, build_sbr_graph,
                             node_performance, sink_equilibria, sink_membership)

EXACT_CYCLE_CAP = 12


def strategy_performance(payoff, weights) -> float:
    """Weighted performance ``W(s) = sum_i w_i J^i(s)``."""
    payoff = np.asarray(payoff, dtype=float)
    w = as_weights(weights, payoff.shape[0])
    return float(payoff @ w)


def path_performance(path: Sequence[int], node_weights) -> float:
    """Mean node weight along a path.

    A directed cycle is passed over its distinct nodes (the closing repeat
    of the first node is not included), so each node counts once.
    """
    if len(path) == 0:
        raise GameError("path must be nonempty")
    return float(sum(node_weights[v] for v in path) / len(path))


def min_mean_cycle(nodes: Sequence[int], successors: dict[int, list[int]],
                   node_weights) -> float:
    """Karp's minimum mean cycle on a strongly connected subgraph.

    The weight of edge ``u -> v`` is ``W(v)``, so a cycle's mean edge weight
    equals the mean weight of its distinct nodes.
    """
    nodes = list(nodes)
    k = len(nodes)
    pos = {v: t for t, v in enumerate(nodes)}
    edges = [(pos[u], pos[v], float(node_weights[v]))
             for u in nodes for v in successors.get(u, ()) if v in pos]
    if not edges:
        raise GameError("subgraph has no cycle")
    src = np.array([e[0] for e in edges])
    dst = np.array([e[1] for e in edges])
    wt = np.array([e[2] for e in edges])
    D = np.full((k + 1, k), np.inf)
    D[0, 0] = 0.0
    for step in range(1, k + 1):
        cand = D[step - 1, src] + wt
        np.minimum.at(D[step], dst, cand)
    best = np.inf
    for v in range(k):
        if not np.isfinite(D[k, v]):
            continue
        worst = -np.inf
        for step in range(k):
            if np.isfinite(D[step, v]):
                worst = max(worst, (D[k, v] - D[step, v]) / (k - step))
        best = min(best, worst)
    return float(best)


@dataclass(frozen=True)
class MetricReport:
    """Metric values per node and per sink."""

    kind: str
    profile_values: np.ndarray
    sink_values: tuple[float, ...]
    sinks: tuple[SinkEquilibrium, ...]
    membership: tuple[int | None, ...]
    memory: int | None = None
    cycle_bound: int | None = None

    def sink_value(self, sink_id: int) -> float:
        return self.sink_values[sink_id]

    def best_sinks(self, atol: float = 1e-12) -> list[int]:
        top = max(self.sink_values)
        return [k for k, v in enumerate(self.sink_values) if v >= top - atol]


def _report(kind, graph, sinks, values, memory=None, cycle_bound=None):
    membership = sink_membership(graph, sinks)
    per_node = np.zeros(graph.num_nodes)
    for q, val in zip(sinks, values):
        per_node[list(q.members)] = val
    return MetricReport(kind, per_node, tuple(values), tuple(sinks),
                        tuple(membership), memory, cycle_bound)


def cycle_metric(graph: SBRGraph, sinks: Sequence[SinkEquilibrium],
                 node_weights, exact_cap: int = EXACT_CYCLE_CAP) -> MetricReport:
    """Worst mean performance over the directed cycles of each sink."""
    node_weights = np.asarray(node_weights, dtype=float)
    values = []
    for q in sinks:
        if q.singleton:
            values.append(float(node_weights[q.members[0]]))
        else:
            values.append(min_mean_cycle(q.members, q.subgraph(graph), node_weights))
    bound = max(max_cycle_length_bound(graph, q, exact_cap) for q in sinks)
    return _report("cycle", graph, sinks, values, cycle_bound=bound)


def memory_metric(graph: SBRGraph, sinks: Sequence[SinkEquilibrium], m: int,
                  node_weights) -> MetricReport:
    """Worst mean performance over SBRPs of ``m`` profiles inside each sink.

    Dynamic programme over (step, end node); a PNE may repeat itself.
    """
    if m < 1:
        raise GameError("memory length m must be >= 1")
    node_weights = np.asarray(node_weights, dtype=float)
    values = []
    for q in sinks:
        values.append(min_sbrp_sum(graph, q, m, node_weights) / m)
    return _report("memory", graph, sinks, values, memory=m)


def min_sbrp_sum(graph: SBRGraph, q: SinkEquilibrium, m: int, node_weights) -> float:
    """Minimum of ``sum W`` over SBRPs with ``m`` profiles inside ``q``."""
    sub = q.subgraph(graph)
    best = {v: float(node_weights[v]) for v in q.members}
    for _ in range(m - 1):
        nxt = {v: np.inf for v in q.members}
        for u, acc in best.items():
            targets = [u] if graph.pne[u] else sub[u]
            for v in targets:
                cand = acc + float(node_weights[v])
                if cand < nxt[v]:
                    nxt[v] = cand
        best = nxt
    return float(min(best.values()))


def simple_cycles(successors: dict[int, list[int]], limit: int | None = None):
    """Yield the simple cycles of a small digraph (each node list once).

    Every cycle is generated from its smallest node, so each appears once.
    """
    nodes = sorted(successors)
    for start in nodes:
        stack = [(start, iter(sorted(successors[start])))]
        path = [start]
        on_path = {start}
        while stack:
            v, it = stack[-1]
            advanced = False
            for w in it:
                if w == start:
                    yield list(path)
                elif w > start and w not in on_path:
                    if limit is not None and len(path) >= limit:
                        continue
                    stack.append((w, iter(sorted(successors[w]))))
                    path.append(w)
                    on_path.add(w)
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                on_path.discard(path.pop())


def max_cycle_length_bound(graph: SBRGraph, sink: SinkEquilibrium,
                           exact_cap: int = EXACT_CYCLE_CAP) -> int:
    """Longest directed cycle in a sink, or ``|Q|`` when the sink is too big
    to enumerate (always a valid upper bound)."""
    size = len(sink)
    if size == 1:
        return 1
    if size > exact_cap:
        return size
    longest = 0
    for cycle in simple_cycles(sink.subgraph(graph)):
        longest = max(longest, len(cycle))
        if longest == size:
            break
    return longest


@dataclass(frozen=True)
class RankRow:
    profile: str
    node: int
    sink_id: int | None
    metric: float
    performance: float


def rank_graph(graph: SBRGraph, kind: str = "cycle", m: int = 1, weights=None,
               exact_cap: int = EXACT_CYCLE_CAP) -> tuple[list[RankRow], MetricReport]:
    """Rank every node of an SBR graph by its metric (descending)."""
    W = node_performance(graph, weights)
    sinks = sink_equilibria(graph)
    if kind == "cycle":
        report = cycle_metric(graph, sinks, W, exact_cap)
    elif kind == "memory":
        report = memory_metric(graph, sinks, m, W)
    else:
        raise GameError(f"unknown metric kind {kind!r}")
    order = sorted(range(graph.num_nodes), key=lambda v: (-report.profile_values[v], v))
    rows = [RankRow(graph.labels[v], v, report.membership[v],
                    float(report.profile_values[v]), float(W[v])) for v in order]
    return rows, report


def rank_strategies(meta: MetaGame, kind: str = "cycle", m: int = 1, weights=None,
                    tie_tol: float | None = None) -> list[RankRow]:
    """Rank the joint profiles of a meta-game by cycle or memory metric.

    Ties are broken by flat profile index.
    """
    graph = build_sbr_graph(meta, tie_tol)
    rows, _ = rank_graph(graph, kind, m, weights)
    return rows
