import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_min_mean_cycle, brute_sbrp_min
from sinkrank.fixtures import corner_submatrix, line_graph, three_by_three, two_pne_ranking
from sinkrank.game_model import GameError
from sinkrank.metrics import (cycle_metric, max_cycle_length_bound, memory_metric,
                              min_mean_cycle, min_sbrp_sum, path_performance, rank_graph,
                              rank_strategies, simple_cycles, strategy_performance)
from sinkrank.response_graph import (SBRGraph, build_sbr_graph, node_performance,
                                     sink_equilibria)


def test_strategy_performance():
    assert strategy_performance([1.0, 0.0], [0.5, 0.5]) == 0.5
    assert strategy_performance([0.75, 1.0], [1.0, 0.0]) == 0.75
    with pytest.raises(GameError):
        strategy_performance([1.0, 1.0], [0.7, 0.7])


def test_path_performance():
    assert path_performance([0, 1], {0: 1.0, 1: 0.0}) == 0.5
    with pytest.raises(GameError):
        path_performance([], {})


def test_three_by_three_cycle_ranking():
    rows = rank_strategies(three_by_three(0.25))
    assert [r.metric for r in rows] == [0.5] * 4 + [0.0] * 5
    assert sorted(r.profile for r in rows[:4]) == ["a1,b2", "a1,b3", "a2,b2", "a2,b3"]
    rows = rank_strategies(three_by_three(0.25), weights=[1.0, 0.0])
    assert [r.metric for r in rows] == [0.5] * 4 + [0.0] * 5


def test_corner_submatrix_metric():
    meta = corner_submatrix(1.0 / 3.0)
    rows = rank_strategies(meta, weights=[1.0, 0.0])
    assert rows[0].profile == "a3,b2"
    assert rows[0].metric == pytest.approx(2.0 / 3.0, abs=1e-15)


def test_two_pne_ranking_order():
    rows = rank_strategies(two_pne_ranking())
    assert [r.profile for r in rows[:2]] == ["a1,b1", "a2,b2"]
    assert rows[0].metric == pytest.approx(0.9) and rows[1].metric == pytest.approx(0.4)
    assert rows[2].metric == 0.0 and rows[2].sink_id is None


def test_ties_broken_by_index():
    rows = rank_strategies(three_by_three(0.25))
    nodes = [r.node for r in rows]
    assert nodes[:4] == sorted(nodes[:4]) and nodes[4:] == sorted(nodes[4:])


def test_memory_metric_matches_cycle_on_simple_cycle():
    meta = three_by_three(0.25)
    g = build_sbr_graph(meta)
    W = node_performance(g)
    sinks = sink_equilibria(g)
    for m in (1, 2, 4, 8):
        rep = memory_metric(g, sinks, m, W)
        assert rep.sink_values[0] == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(GameError):
        memory_metric(g, sinks, 0, W)


def test_line_graph_rank():
    rows, rep = rank_graph(line_graph())
    assert rows[0].profile == "a1,b1" and rows[0].metric == 0.9
    assert rep.cycle_bound == 1


def test_metric_zero_outside_sinks():
    meta = three_by_three(0.25)
    g = build_sbr_graph(meta)
    rep = cycle_metric(g, sink_equilibria(g), node_performance(g))
    outside = [v for v in range(g.num_nodes) if rep.membership[v] is None]
    assert outside and all(rep.profile_values[v] == 0.0 for v in outside)


@st.composite
def strongly_connected(draw):
    k = draw(st.integers(1, 8))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(k)
    succ = {v: set() for v in range(k)}
    if k > 1:
        for a, b in zip(perm, np.roll(perm, -1)):
            succ[int(a)].add(int(b))
    extra = draw(st.integers(0, 2 * k))
    for _ in range(extra):
        a, b = rng.integers(k, size=2)
        if a != b:
            succ[int(a)].add(int(b))
    weights = rng.random(k).round(3)
    return {v: sorted(s) for v, s in succ.items()}, weights


@settings(max_examples=100, deadline=None)
@given(strongly_connected())
def test_karp_matches_brute_force(case):
    succ, weights = case
    nodes = list(succ)
    if len(nodes) == 1:
        return
    assert min_mean_cycle(nodes, succ, weights) == pytest.approx(
        brute_min_mean_cycle(nodes, succ, weights), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(strongly_connected(), st.integers(1, 5))
def test_memory_dp_matches_brute_force(case, m):
    succ, weights = case
    k = len(succ)
    nodes = [str(v) for v in range(k)]
    edges = [(str(u), str(v)) for u, vs in succ.items() for v in vs]
    g = SBRGraph.from_edges(nodes, edges, {str(v): float(weights[v]) for v in range(k)})
    q = sink_equilibria(g)[0] if k > 1 else sink_equilibria(g)[0]
    dp = min_sbrp_sum(g, q, m, weights)
    assert dp == brute_sbrp_min(g, list(q.members), m, weights)


def test_simple_cycles_and_length_bound():
    succ = {0: [1], 1: [2, 0], 2: [0]}
    cycles = sorted(map(tuple, simple_cycles(succ)))
    assert cycles == [(0, 1), (0, 1, 2)]
    g = SBRGraph.from_edges(["0", "1", "2"], [("0", "1"), ("1", "2"), ("1", "0"), ("2", "0")])
    q = sink_equilibria(g)[0]
    assert max_cycle_length_bound(g, q) == 3
    assert max_cycle_length_bound(g, q, exact_cap=2) == 3


def test_unknown_kind():
    with pytest.raises(GameError):
        rank_graph(line_graph(), kind="other")
