"""Strict best response graphs, pure Nash equilibria and sink equilibria."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game_model import GameError, MetaGame, as_weights, best_responses


@dataclass
class SBRGraph:
    """Digraph over joint profiles with strict-best-response edges.

    Nodes are integers ``0..N-1``.  When built from a meta-game node ``k`` is
    the flat index of a profile; in graph-only mode nodes carry just labels
    and optional performance weights.
    """

    labels: list[str]
    successors: list[list[int]]
    deviator: dict[tuple[int, int], int] = field(default_factory=dict)
    weights: dict[int, float] | None = None
    meta: MetaGame | None = None
    _sccs: list[list[int]] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.pne = [len(succ) == 0 for succ in self.successors]
        self._edge_set = {(u, v) for u, succ in enumerate(self.successors) for v in succ}

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, succ in enumerate(self.successors) for v in succ]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_set

    def node(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise GameError(f"unknown node {label!r}") from None

    @classmethod
    def from_edges(cls, nodes: Sequence[str], edges, weights=None) -> "SBRGraph":
        """Graph-only mode: explicit node labels, edge list and optional W(s)."""
        labels = [str(v) for v in nodes]
        if len(set(labels)) != len(labels):
            raise GameError("duplicate node labels")
        index = {v: k for k, v in enumerate(labels)}
        succ: list[list[int]] = [[] for _ in labels]
        for edge in edges:
            u, v = (str(x) for x in edge)
            if u not in index or v not in index:
                raise GameError(f"edge {edge} references an unknown node")
            if u == v:
                raise GameError(f"self-loop at {u} is not a strict best response")
            if index[v] not in succ[index[u]]:
                succ[index[u]].append(index[v])
        w = None
        if weights is not None:
            w = {index[str(k)]: float(val) for k, val in weights.items()}
        return cls(labels, succ, weights=w)

    # components ----------------------------------------------------------
    def sccs(self) -> list[list[int]]:
        """Strongly connected components, in reverse topological order."""
        if self._sccs is None:
            self._sccs = tarjan_scc(self.successors)
            _assert_condensation_acyclic(self.successors, self._sccs)
        return self._sccs

    def to_dot(self) -> str:
        lines = ["digraph sbr {"]
        for k, name in enumerate(self.labels):
            shape = "doublecircle" if self.pne[k] else "circle"
            lines.append(f'  n{k} [label="{name}", shape={shape}];')
        for u, v in self.edges():
            lines.append(f"  n{u} -> n{v};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def tarjan_scc(successors: Sequence[Sequence[int]]) -> list[list[int]]:
    """Tarjan's algorithm with an explicit stack (no recursion).

    Components are emitted in reverse topological order of the
    condensation: every edge between components goes from a later to an
    earlier component in the returned list.
    """
    n = len(successors)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, i = work[-1]
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            succ = successors[v]
            if i < len(succ):
                work[-1] = (v, i + 1)
                w = succ[i]
                if index[w] == -1:
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def _assert_condensation_acyclic(successors, comps) -> None:
    where = {}
    for c, comp in enumerate(comps):
        for v in comp:
            where[v] = c
    for u, succ in enumerate(successors):
        for v in succ:
            if where[u] < where[v]:
                raise AssertionError("condensation is not acyclic")


def build_sbr_graph(meta: MetaGame, tie_tol: float | None = None) -> SBRGraph:
    """Strict best response graph of a meta-game.

    An edge ``s -> s'`` exists when ``s'`` changes one agent's strategy to a
    best response against the others and strictly raises that agent's
    payoff.  ``tie_tol=None`` uses the meta-game's own tolerance rule.
    """
    profiles = meta.profiles()
    successors: list[list[int]] = []
    deviator: dict[tuple[int, int], int] = {}
    for flat, s in enumerate(profiles):
        succ = []
        for i in range(meta.num_agents):
            for k in best_responses(meta, i, s, tie_tol):
                if k == s[i]:
                    continue
                alt = s[:i] + (k,) + s[i + 1:]
                if _strictly_better(meta, alt, s, i, tie_tol):
                    target = meta.index(alt)
                    succ.append(target)
                    deviator[(flat, target)] = i
        successors.append(succ)
    labels = [meta.label(s) for s in profiles]
    return SBRGraph(labels, successors, deviator, meta=meta)


def _strictly_better(meta, new, old, agent, tie_tol) -> bool:
    if tie_tol is None:
        return meta.improves(new, old, agent)
    return meta.payoff(new)[agent] - meta.payoff(old)[agent] > tie_tol


def pure_nash(meta: MetaGame, tie_tol: float | None = None) -> list[tuple[int, ...]]:
    """Profiles where no agent has a strictly improving unilateral deviation."""
    out = []
    for s in meta.profiles():
        stable = True
        for i in range(meta.num_agents):
            for k in range(meta.shape[i]):
                alt = s[:i] + (k,) + s[i + 1:]
                if k != s[i] and _strictly_better(meta, alt, s, i, tie_tol):
                    stable = False
                    break
            if not stable:
                break
        if stable:
            out.append(s)
    return out


@dataclass(frozen=True)
class SinkEquilibrium:
    """A sink strongly connected component of an SBR graph."""

    members: tuple[int, ...]
    sink_id: int

    @property
    def singleton(self) -> bool:
        return len(self.members) == 1

    def __contains__(self, node) -> bool:
        return node in self.members

    def __len__(self) -> int:
        return len(self.members)

    def subgraph(self, graph: SBRGraph) -> dict[int, list[int]]:
        inside = set(self.members)
        return {u: [v for v in graph.successors[u] if v in inside] for u in self.members}


def sink_equilibria(graph: SBRGraph) -> list[SinkEquilibrium]:
    """All sink SCCs, ordered by smallest member node."""
    comps = graph.sccs()
    where = {}
    for c, comp in enumerate(comps):
        for v in comp:
            where[v] = c
    sinks = []
    for c, comp in enumerate(comps):
        if all(where[v] == c for u in comp for v in graph.successors[u]):
            sinks.append(tuple(comp))
    sinks.sort(key=lambda comp: comp[0])
    if not sinks:
        raise AssertionError("a finite digraph always has a sink component")
    return [SinkEquilibrium(members, k) for k, members in enumerate(sinks)]


def sink_membership(graph: SBRGraph, sinks: Sequence[SinkEquilibrium]) -> list[int | None]:
    """Sink id of every node, or None for nodes outside all sinks."""
    member = [None] * graph.num_nodes
    for q in sinks:
        for v in q.members:
            member[v] = q.sink_id
    return member


def is_sbrp(graph: SBRGraph, sequence: Sequence[int]) -> bool:
    """Whether a profile sequence is a strict best response path.

    Each step must follow an SBR edge, or repeat the current node when that
    node is a pure Nash equilibrium.
    """
    if len(sequence) == 0:
        raise GameError("an SBRP needs at least one profile")
    for v in sequence:
        if not 0 <= v < graph.num_nodes:
            raise GameError(f"unknown node {v}")
    for u, v in zip(sequence, sequence[1:]):
        if u == v and graph.pne[u]:
            continue
        if not graph.has_edge(u, v):
            return False
    return True


def node_performance(graph: SBRGraph, weights=None) -> np.ndarray:
    """``W(s)`` for every node: from graph weights in graph-only mode, else
    the weighted sum of the meta-game payoffs."""
    if graph.meta is None:
        if graph.weights is None:
            raise GameError("graph-only input needs node weights for metrics")
        missing = [graph.labels[k] for k in range(graph.num_nodes) if k not in graph.weights]
        if missing:
            raise GameError(f"missing weights for {missing}")
        return np.array([graph.weights[k] for k in range(graph.num_nodes)])
    w = as_weights(weights, graph.meta.num_agents)
    table = graph.meta.payoff_table().reshape(-1, graph.meta.num_agents)
    return table @ w
