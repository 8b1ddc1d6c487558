"""JSON file formats for stochastic games, meta-games and bare graphs.

All documents carry ``"format": "sinkrank-v1"``.  The document kind is
inferred from its keys: ``transition`` (stochastic game), ``payoffs``
(meta-game) or ``nodes``/``edges`` (graph only).
"""

from __future__ import annotations

import hashlib
import itertools
import json
from pathlib import Path

import numpy as np

from .game_model import GameError, MetaGame, StochasticGame
from .response_graph import SBRGraph

FORMAT = "sinkrank-v1"


class SchemaError(GameError):
    """Malformed input document."""


class _Doc:
    """Wraps a parsed document so errors can point at the source line."""

    def __init__(self, data: dict, text: str, name: str):
        self.data = data
        self.text = text
        self.name = name

    def line_of(self, key: str) -> int | None:
        needle = f'"{key}"'
        pos = self.text.find(needle)
        if pos < 0:
            return None
        return self.text.count("\n", 0, pos) + 1

    def fail(self, key: str, msg: str):
        line = self.line_of(key)
        where = f"{self.name}:{line}" if line else self.name
        raise SchemaError(f"{where}: {key}: {msg}")

    def get(self, key: str, required: bool = True):
        if key not in self.data:
            if required:
                self.fail(key, "missing required field")
            return None
        return self.data[key]


def digest(text: str | bytes) -> str:
    if isinstance(text, str):
        text = text.encode()
    return hashlib.sha256(text).hexdigest()


def read_document(path: str | Path) -> tuple[dict, str]:
    """Parse a document; returns the data and the raw text."""
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise SchemaError(f"{path}:1: top level must be an object")
    return data, text


def document_kind(data: dict) -> str:
    if "transition" in data:
        return "stochastic-game"
    if "payoffs" in data:
        return "meta-game"
    if "nodes" in data or "edges" in data:
        return "graph"
    raise SchemaError("cannot tell the document kind: expected transition, payoffs or nodes")


def load(path: str | Path):
    """Load any document; returns ``(kind, object)``."""
    data, text = read_document(path)
    return parse(data, text, str(path))


def parse(data: dict, text: str = "", name: str = "<input>"):
    doc = _Doc(data, text or json.dumps(data, indent=1), name)
    fmt = data.get("format")
    if fmt != FORMAT:
        doc.fail("format", f"expected {FORMAT!r}, got {fmt!r}")
    kind = document_kind(data)
    if kind == "stochastic-game":
        return kind, _parse_game(doc)
    if kind == "meta-game":
        return kind, _parse_meta(doc)
    return kind, _parse_graph(doc)


def _names(doc: _Doc, key: str, n: int) -> list[list[str]]:
    sets = doc.get(key)
    if not isinstance(sets, list) or len(sets) != n:
        doc.fail(key, f"expected a list of {n} strategy lists")
    out = []
    for i, names in enumerate(sets):
        if not isinstance(names, list) or not names:
            doc.fail(key, f"agent {i} has an empty strategy set")
        names = [str(x) for x in names]
        if len(set(names)) != len(names):
            doc.fail(key, f"agent {i} has duplicate names")
        if any("," in x for x in names):
            doc.fail(key, "names may not contain commas")
        out.append(names)
    return out


def _agents(doc: _Doc) -> int:
    n = doc.get("agents")
    if not isinstance(n, int) or n < 1:
        doc.fail("agents", "must be a positive integer")
    return n


def _parse_meta(doc: _Doc) -> MetaGame:
    n = _agents(doc)
    names = _names(doc, "strategies", n)
    shape = tuple(len(x) for x in names)
    try:
        table = np.asarray(doc.get("payoffs"), dtype=float)
    except (TypeError, ValueError):
        doc.fail("payoffs", "must be a rectangular numeric array")
    if table.shape != shape + (n,):
        doc.fail("payoffs", f"shape {table.shape} does not match {shape + (n,)}")
    se = doc.get("std_err", required=False)
    if se is not None:
        try:
            se = np.asarray(se, dtype=float)
        except (TypeError, ValueError):
            doc.fail("std_err", "must be a rectangular numeric array")
        if se.shape != table.shape:
            doc.fail("std_err", f"shape {se.shape} does not match {table.shape}")
    try:
        return MetaGame(names, table, se)
    except GameError as exc:
        doc.fail("payoffs", str(exc))


def _parse_game(doc: _Doc) -> StochasticGame:
    n = _agents(doc)
    states = doc.get("states")
    if not isinstance(states, list) or not states:
        doc.fail("states", "must be a nonempty list")
    states = [str(x) for x in states]
    actions = _names(doc, "actions", n)
    shape = tuple(len(a) for a in actions)
    X = len(states)
    P = np.zeros((X,) + shape + (X,))
    R = np.zeros((n, X) + shape)
    trans = doc.get("transition")
    rewards = doc.get("rewards")
    for key, block in (("transition", trans), ("rewards", rewards)):
        if not isinstance(block, dict):
            doc.fail(key, "must map state names to joint-action tables")
    for x, state in enumerate(states):
        t_rows = trans.get(state)
        r_rows = rewards.get(state)
        if not isinstance(t_rows, dict):
            doc.fail("transition", f"missing state {state!r}")
        if not isinstance(r_rows, dict):
            doc.fail("rewards", f"missing state {state!r}")
        for joint in itertools.product(*(range(k) for k in shape)):
            label = ",".join(actions[i][a] for i, a in enumerate(joint))
            dist = t_rows.get(label)
            if not isinstance(dist, dict):
                doc.fail("transition", f"state {state!r} lacks joint action {label!r}")
            for target, p in dist.items():
                if target not in states:
                    doc.fail("transition", f"unknown next state {target!r}")
                P[(x,) + joint + (states.index(target),)] = float(p)
            r = r_rows.get(label)
            if not isinstance(r, list) or len(r) != n:
                doc.fail("rewards", f"state {state!r}, {label!r}: need {n} rewards")
            R[(slice(None), x) + joint] = [float(v) for v in r]
    discounts = doc.get("discounts")
    if not isinstance(discounts, list) or len(discounts) != n:
        doc.fail("discounts", f"need {n} discount factors")
    try:
        return StochasticGame(P, R, discounts, tuple(states), tuple(tuple(a) for a in actions))
    except GameError as exc:
        doc.fail("transition", str(exc))


def _parse_graph(doc: _Doc) -> SBRGraph:
    nodes = doc.get("nodes")
    edges = doc.get("edges")
    if not isinstance(nodes, list) or not nodes:
        doc.fail("nodes", "must be a nonempty list")
    if not isinstance(edges, list) or any(
            not isinstance(e, list) or len(e) != 2 for e in edges):
        doc.fail("edges", "must be a list of [from, to] pairs")
    weights = doc.get("weights", required=False)
    if weights is not None and not isinstance(weights, dict):
        doc.fail("weights", "must map node names to numbers")
    try:
        return SBRGraph.from_edges(nodes, edges, weights)
    except GameError as exc:
        doc.fail("edges", str(exc))


# writers ------------------------------------------------------------------

def meta_to_doc(meta: MetaGame) -> dict:
    doc = {"format": FORMAT, "agents": meta.num_agents,
           "strategies": [list(s) for s in meta.strategies],
           "payoffs": meta.payoff_table().tolist()}
    if meta.estimated:
        doc["std_err"] = meta.std_err_table().tolist()
    return doc


def game_to_doc(game: StochasticGame) -> dict:
    shape = game.num_actions
    names = game.action_names
    trans, rewards = {}, {}
    for x, state in enumerate(game.state_names):
        trans[state], rewards[state] = {}, {}
        for joint in itertools.product(*(range(k) for k in shape)):
            label = ",".join(names[i][a] for i, a in enumerate(joint))
            row = game.transition[(x,) + joint]
            trans[state][label] = {game.state_names[y]: float(p)
                                   for y, p in enumerate(row) if p > 0}
            rewards[state][label] = [float(v) for v in game.rewards[(slice(None), x) + joint]]
    return {"format": FORMAT, "agents": game.num_agents,
            "states": list(game.state_names), "actions": [list(a) for a in names],
            "transition": trans, "rewards": rewards,
            "discounts": [float(b) for b in game.discounts]}


def graph_to_doc(graph: SBRGraph) -> dict:
    doc = {"format": FORMAT, "nodes": list(graph.labels),
           "edges": [[graph.labels[u], graph.labels[v]] for u, v in graph.edges()]}
    if graph.weights is not None:
        doc["weights"] = {graph.labels[k]: w for k, w in sorted(graph.weights.items())}
    return doc


def write_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
