"""Independent reference computations used only by the tests."""

from __future__ import annotations

import itertools

import networkx as nx
import numpy as np
from scipy.optimize import linprog

from sinkrank.game_model import JointPolicy, MetaGame, StochasticGame


def value_iteration(game: StochasticGame, policy: JointPolicy, agent: int,
                    tol: float = 1e-13, max_iter: int = 100_000) -> np.ndarray:
    states = np.arange(game.num_states)
    index = (states,) + tuple(np.asarray(a) for a in policy.actions)
    P = game.transition[index]
    R = game.rewards[(agent,) + index]
    beta = game.discounts[agent]
    V = np.zeros(game.num_states)
    for _ in range(max_iter):
        new = R + beta * P @ V
        if np.max(np.abs(new - V)) < tol:
            return new
        V = new
    return V


def brute_best_responses(meta: MetaGame, agent: int, profile) -> set[int]:
    vals = []
    for k in range(meta.shape[agent]):
        alt = tuple(profile[:agent]) + (k,) + tuple(profile[agent + 1:])
        vals.append(meta.payoff(alt)[agent])
    top = max(vals)
    return {k for k, v in enumerate(vals) if v == top}


def brute_min_mean_cycle(nodes, successors, weights) -> float:
    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    for u in nodes:
        for v in successors.get(u, ()):
            if v in nodes:
                g.add_edge(u, v)
    best = np.inf
    for cycle in nx.simple_cycles(g):
        best = min(best, sum(weights[v] for v in cycle) / len(cycle))
    return float(best)


def brute_sbrp_min(graph, members, m, weights) -> float:
    """Minimum summed weight over all length-m SBRPs inside ``members``."""
    best = np.inf
    for seq in itertools.product(members, repeat=m):
        ok = all((u == v and graph.pne[u]) or graph.has_edge(u, v)
                 for u, v in zip(seq, seq[1:]))
        if ok:
            best = min(best, sum(float(weights[v]) for v in seq))
    return best


def brute_in_tree_cost(num_nodes: int, edges: dict, root: int) -> float:
    """Cheapest spanning tree directed into ``root`` by exhaustive search.

    ``edges`` maps ``(u, v)`` to a finite resistance."""
    others = [v for v in range(num_nodes) if v != root]
    choices = [[(u, w) for (u, w) in edges if u == v and w != v] for v in others]
    best = np.inf
    for pick in itertools.product(*choices):
        parent = dict(pick)
        ok = True
        for v in others:
            seen = set()
            u = v
            while u != root:
                if u in seen:
                    ok = False
                    break
                seen.add(u)
                u = parent[u]
            if not ok:
                break
        if ok:
            best = min(best, sum(edges[e] for e in pick))
    return best


def nx_in_tree_cost(num_nodes: int, src, dst, weight, root: int) -> float:
    """Same quantity through networkx on the reversed graph."""
    g = nx.DiGraph()
    g.add_nodes_from(range(num_nodes))
    for u, v, w in zip(src, dst, weight):
        if u == v or not np.isfinite(w):
            continue
        # reversed: tree edge v -> u in the out-arborescence from root
        if g.has_edge(v, u):
            g[v][u]["weight"] = min(g[v][u]["weight"], w)
        else:
            g.add_edge(v, u, weight=float(w))
    # forbid edges into the root of the out-arborescence
    g.remove_edges_from([(a, b) for a, b in list(g.edges) if b == root])
    arb = nx.minimum_spanning_arborescence(g, attr="weight", preserve_attrs=True)
    return float(sum(d["weight"] for _, _, d in arb.edges(data=True)))


def power_iteration(P, tol: float = 1e-15, max_iter: int = 1_000_000) -> np.ndarray:
    P = P.toarray() if hasattr(P, "toarray") else np.asarray(P)
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        new = pi @ P
        if np.max(np.abs(new - pi)) < tol:
            return new / new.sum()
        pi = new
    return pi / pi.sum()


def exponent_fit(probabilities, eps_grid) -> float:
    """Slope of log P against log eps (least squares)."""
    x = np.log(np.asarray(eps_grid))
    y = np.log(np.asarray(probabilities))
    return float(np.polyfit(x, y, 1)[0])


def linprog_support_cce(meta: MetaGame, support, floor: float = 1e-6) -> bool:
    """Float LP feasibility of a CCE with the given support."""
    table = meta.payoff_table()
    k = len(support)
    A_ub, b_ub = [], []
    for i in range(meta.num_agents):
        for dev in range(meta.shape[i]):
            row = []
            for s in support:
                alt = tuple(s[:i]) + (dev,) + tuple(s[i + 1:])
                row.append(table[tuple(alt) + (i,)] - table[tuple(s) + (i,)])
            A_ub.append(row)
            b_ub.append(0.0)
    res = linprog(np.zeros(k), A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                  A_eq=np.ones((1, k)), b_eq=[1.0], bounds=[(floor, 1)] * k,
                  method="highs")
    return res.status == 0


def brute_transition_row(meta: MetaGame, window, eps_bar: float) -> dict:
    """Next-window distribution of one phase by enumerating every outcome:
    learner, each agent's explore coin and choice, and the history coin."""
    from sinkrank.game_model import best_responses
    from sinkrank.response_graph import pure_nash

    n = meta.num_agents
    pne = set(pure_nash(meta))
    s = meta.profile(window[-1])
    out: dict = {}

    def add(key, p):
        out[key] = out.get(key, 0.0) + p

    for j in range(n):
        per_agent = []
        for i in range(n):
            options = []
            for k in range(meta.shape[i]):
                options.append((k, eps_bar / meta.shape[i], True))
            if i == j:
                brs = best_responses(meta, j, s)
                for k in brs:
                    options.append((k, (1 - eps_bar) / len(brs), False))
            else:
                options.append((s[i], 1 - eps_bar, False))
            per_agent.append(options)
        for combo in itertools.product(*per_agent):
            p = 1.0 / n
            for _, q, _ in combo:
                p *= q
            if p == 0.0:
                continue
            cand = tuple(k for k, _, _ in combo)
            shifted = tuple(window[1:]) + (meta.index(cand),)
            add(shifted, p * eps_bar)
            if s in pne:
                add(tuple(window[1:]) + (meta.index(s),), p * (1 - eps_bar))
            elif meta.improves(cand, s, j):
                add(shifted, p * (1 - eps_bar))
            else:
                add(tuple(window), p * (1 - eps_bar))
    return out


def brute_sbrp_min_dfs(graph, members, m, weights) -> float:
    """Minimum summed weight over length-m SBRPs in ``members`` by explicit
    recursive path enumeration (no dynamic programming)."""
    inside = set(members)
    best = np.inf

    def extend(path, total):
        nonlocal best
        if len(path) == m:
            best = min(best, total)
            return
        u = path[-1]
        nxt = [v for v in graph.successors[u] if v in inside]
        if graph.pne[u]:
            nxt.append(u)
        for v in nxt:
            extend(path + [v], total + float(weights[v]))

    for u in members:
        extend([u], float(weights[u]))
    return best
