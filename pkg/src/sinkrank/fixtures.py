"""Small reference games used by tests, examples and the CLI."""

from __future__ import annotations

import numpy as np

from .game_model import MetaGame, StochasticGame
from .response_graph import SBRGraph

ROWS = ("a1", "a2", "a3")
COLS = ("b1", "b2", "b3")


def two_player(table, rows=None, cols=None) -> MetaGame:
    """Meta-game from a nested ``[row][col] -> (J1, J2)`` table."""
    table = np.asarray(table, dtype=float)
    rows = rows or [f"a{k + 1}" for k in range(table.shape[0])]
    cols = cols or [f"b{k + 1}" for k in range(table.shape[1])]
    return MetaGame([rows, cols], table)


def three_by_three(eps: float = 0.25) -> MetaGame:
    """Three-strategy game whose only sink is a four-cycle without a PNE."""
    e = eps
    return two_player([
        [(1, 1 - e), (0, 1), (1, 0)],
        [(0, 1 - e), (1, 0), (0, 1)],
        [(0, 0), (1 - e, 0), (1 - e, 1)],
    ])


def corner_submatrix(eps: float = 1.0 / 3.0) -> MetaGame:
    """Rows a1, a3 against columns b1, b2 of :func:`three_by_three`."""
    return three_by_three(eps).submatrix([[0, 2], [0, 1]])


def cycle_submatrix(eps: float = 0.25) -> MetaGame:
    """Rows a1, a2 against columns b2, b3 of :func:`three_by_three`."""
    return three_by_three(eps).submatrix([[0, 1], [1, 2]])


def line_graph() -> SBRGraph:
    """Six-node graph-only example whose unique sink is ``a1,b1``."""
    nodes = ["a1,b1", "a1,b2", "a1,b3", "a2,b1", "a2,b2", "a2,b3"]
    edges = [("a1,b2", "a2,b2"), ("a2,b2", "a2,b3"), ("a2,b3", "a2,b1"),
             ("a2,b1", "a1,b1"), ("a1,b3", "a1,b1")]
    weights = {"a1,b1": 0.9, "a1,b2": 0.2, "a1,b3": 0.4,
               "a2,b1": 0.5, "a2,b2": 0.3, "a2,b3": 0.1}
    return SBRGraph.from_edges(nodes, edges, weights)


def prisoners_dilemma() -> MetaGame:
    return two_player([[(3, 3), (0, 5)], [(5, 0), (1, 1)]],
                      ["cooperate", "defect"], ["cooperate", "defect"])


def matching_pennies() -> MetaGame:
    return two_player([[(1, 0), (0, 1)], [(0, 1), (1, 0)]])


def coordination(high: float = 1.0, low: float = 0.1) -> MetaGame:
    """2x2 coordination game with PNEs of value ``high`` and ``low``."""
    return two_player([[(high, high), (0, 0)], [(0, 0), (low, low)]])


def two_pne_ranking() -> MetaGame:
    """Two PNEs with welfare 0.9 and 0.4 plus dominated off-diagonal cells."""
    return two_player([[(0.9, 0.9), (0.2, 0.1)], [(0.1, 0.2), (0.4, 0.4)]])


def cycle_and_pne(cycle_hi: float = 0.1, side: float = 0.02,
                  pne: float = 0.9) -> MetaGame:
    """A four-cycle sink in the top-left block plus a PNE at ``(a3, b3)``.

    Cycle profiles pay ``(cycle_hi, 0)`` or ``(0, cycle_hi)``; the border
    cells pay ``side`` to the agent who would deviate into them.
    """
    h, d = cycle_hi, side
    return two_player([
        [(h, 0), (0, h), (0, d)],
        [(0, h), (h, 0), (0, d)],
        [(d, 0), (d, 0), (pne, pne)],
    ])


def cycle_beats_pne() -> MetaGame:
    """Cycle sink of mean welfare 0.3 beside a PNE of welfare 0.26; the
    cycle has the higher metric but the PNE is harder to leave."""
    return two_player([
        [(0.4, 0.2), (0.2, 0.4), (0, 0.25)],
        [(0.2, 0.4), (0.4, 0.2), (0, 0.25)],
        [(0.25, 0), (0.25, 0), (0.26, 0.26)],
    ])


def tied_sinks() -> MetaGame:
    """Two PNEs with the same welfare."""
    return coordination(0.5, 0.5)


def small_stochastic_game() -> StochasticGame:
    """Two agents, two states, two actions each, random transitions."""
    rng = np.random.default_rng(7)
    P = rng.random((2, 2, 2, 2)) + 0.1
    P /= P.sum(axis=-1, keepdims=True)
    R = rng.random((2, 2, 2, 2))
    return StochasticGame(P, R, [0.5, 0.5], ("x0", "x1"), (("L", "R"), ("U", "D")))


META_FIXTURES = {
    "three_by_three": three_by_three,
    "corner_submatrix": corner_submatrix,
    "cycle_submatrix": cycle_submatrix,
    "prisoners_dilemma": prisoners_dilemma,
    "matching_pennies": matching_pennies,
    "coordination": coordination,
    "two_pne_ranking": two_pne_ranking,
    "cycle_and_pne": cycle_and_pne,
    "cycle_beats_pne": cycle_beats_pne,
    "tied_sinks": tied_sinks,
}
