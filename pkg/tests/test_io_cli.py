import json
from pathlib import Path

import numpy as np
import pytest

from sinkrank import io as sio
from sinkrank.cli import main
from sinkrank.fixtures import (META_FIXTURES, line_graph, small_stochastic_game,
                               three_by_three)
from sinkrank.game_model import GameError
from sinkrank.reporting import read_csv

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture(name):
    return str(FIXTURES / f"{name}.json")


@pytest.mark.parametrize("name", sorted(META_FIXTURES))
def test_meta_round_trip(tmp_path, name):
    meta = META_FIXTURES[name]()
    path = tmp_path / "g.json"
    sio.write_json(sio.meta_to_doc(meta), path)
    kind, back = sio.load(path)
    assert kind == "meta-game"
    assert back.strategies == meta.strategies
    np.testing.assert_array_equal(back.payoff_table(), meta.payoff_table())


def test_game_and_graph_round_trip(tmp_path):
    game = small_stochastic_game()
    sio.write_json(sio.game_to_doc(game), tmp_path / "s.json")
    kind, back = sio.load(tmp_path / "s.json")
    assert kind == "stochastic-game"
    np.testing.assert_array_equal(back.transition, game.transition)
    np.testing.assert_array_equal(back.rewards, game.rewards)
    graph = line_graph()
    sio.write_json(sio.graph_to_doc(graph), tmp_path / "l.json")
    kind, back = sio.load(tmp_path / "l.json")
    assert kind == "graph" and back.labels == graph.labels
    assert sorted(back.edges()) == sorted(graph.edges())


def test_shipped_fixtures_match_builders():
    for name, make in META_FIXTURES.items():
        _, meta = sio.load(fixture(name))
        np.testing.assert_array_equal(meta.payoff_table(), make().payoff_table())


def _doc_text(doc):
    return json.dumps(doc, indent=2)


def test_schema_errors_carry_line_numbers(tmp_path):
    doc = sio.meta_to_doc(three_by_three())
    doc["strategies"][1] = []
    text = _doc_text(doc)
    with pytest.raises(sio.SchemaError, match=r"g.json:4: strategies: agent 1 has an empty strategy set"):
        sio.parse(json.loads(text), text, "g.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "format": "sinkrank-v1",\n  "agents": 2,\n}\n')
    with pytest.raises(sio.SchemaError, match=r"bad.json:4: invalid JSON"):
        sio.read_document(bad)


@pytest.mark.parametrize("mutate,needle", [
    (lambda d: d.update(format="other"), "format"),
    (lambda d: d.update(payoffs=[[1, 2]]), "payoffs"),
    (lambda d: d.update(agents=0), "agents"),
    (lambda d: d["strategies"][0].__setitem__(0, "a2"), "duplicate"),
    (lambda d: d.pop("payoffs"), "payoffs"),
])
def test_schema_rejects(mutate, needle):
    doc = sio.meta_to_doc(three_by_three())
    mutate(doc)
    with pytest.raises(GameError, match=needle):
        sio.parse(doc)


def test_unknown_document_kind():
    with pytest.raises(GameError, match="document kind"):
        sio.parse({"format": sio.FORMAT})


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_analyze(capsys):
    code, out, _ = run(capsys, "analyze", "--game", fixture("three_by_three"))
    body = json.loads(out)
    assert code == 0 and body["pne"] == []
    assert sorted(body["sinks"][0]["members"]) == ["a1,b2", "a1,b3", "a2,b2", "a2,b3"]
    assert body["manifest"]["command"] == "analyze"
    code, out, _ = run(capsys, "analyze", "--game", fixture("line_graph"), "--format", "csv")
    _, rows = read_csv(out)
    assert code == 0 and {r["profile"] for r in rows if r["sink_id"] != ""} == {"a1,b1"}


def test_cli_rank_csv(capsys, tmp_path):
    fig = tmp_path / "rank.png"
    code, out, _ = run(capsys, "rank", "--game", fixture("three_by_three"), "--figure", str(fig))
    manifest, rows = read_csv(out)
    assert code == 0 and manifest["command"] == "rank" and manifest["seed"] == 0
    assert list(rows[0]) == ["profile", "sink_id", "metric", "W"]
    assert [float(r["metric"]) for r in rows] == [0.5] * 4 + [0.0] * 5
    assert fig.exists() and fig.stat().st_size > 0


def test_cli_rank_memory_json(capsys):
    code, out, _ = run(capsys, "rank", "--game", fixture("two_pne_ranking"),
                       "--metric", "memory", "--memory", "3", "--format", "json")
    body = json.loads(out)
    assert code == 0 and body["rows"][0]["profile"] == "a1,b1"
    assert body["rows"][0]["metric"] == pytest.approx(0.9)


def test_cli_weights_hint(capsys):
    code, _, err = run(capsys, "rank", "--game", fixture("three_by_three"),
                       "--weights", "1,1")
    assert code == 2 and "normalize" in err and "0.5, 0.5" in err


def test_cli_simulate(capsys, tmp_path):
    fig = tmp_path / "occ.png"
    out_file = tmp_path / "sim.csv"
    code, _, _ = run(capsys, "simulate", "--game", fixture("cycle_and_pne"), "--memory", "2",
                     "--epsilon", "0.01", "--delta", "0.6", "--steps", "20000",
                     "--burn-in", "500", "--seed", "3", "--out", str(out_file),
                     "--figure", str(fig))
    manifest, rows = read_csv(out_file.read_text())
    assert code == 0 and manifest["flags"]["epsilon"] == 0.01
    freq = {r["profile"]: float(r["frequency"]) for r in rows}
    assert freq["a3,b3"] > 0.9
    assert sum(freq.values()) == pytest.approx(1.0)
    assert fig.exists()


def test_cli_simulate_initial_and_bad_label(capsys):
    code, _, _ = run(capsys, "simulate", "--game", fixture("coordination"), "--memory", "1",
                     "--epsilon", "0", "--delta", "0.5", "--steps", "50",
                     "--initial", "a2,b2")
    assert code == 0
    code, _, err = run(capsys, "simulate", "--game", fixture("coordination"), "--memory", "1",
                       "--epsilon", "0", "--delta", "0.5", "--initial", "a9,b2")
    assert code == 2 and "a9" in err


def test_cli_chain(capsys, tmp_path):
    fig = tmp_path / "mass.png"
    code, out, _ = run(capsys, "chain", "--game", fixture("cycle_and_pne"), "--memory", "2",
                       "--delta", "0.6", "--delta0", "0.85", "--figure", str(fig))
    body = json.loads(out)
    assert code == 0 and body["num_states"] == 81
    assert body["stable_states"] == ["(a3,b3)|(a3,b3)"]
    assert body["verdict"]["status"] == "pass"
    assert fig.exists()
    code, out, _ = run(capsys, "chain", "--game", fixture("coordination"), "--memory", "2",
                       "--delta", "0.5", "--format", "csv", "--epsilon-grid", "0.1,0.01")
    _, rows = read_csv(out)
    assert code == 0 and list(rows[0]) == ["state", "rcc", "gamma", "pi@0.1", "pi@0.01"]


def test_cli_chain_state_cap(capsys, monkeypatch):
    monkeypatch.setenv("SINKRANK_STATE_CAP", "10")
    code, _, err = run(capsys, "chain", "--game", fixture("three_by_three"), "--memory", "2",
                       "--delta", "0.5")
    assert code == 2 and "state cap" in err


def test_cli_cce_check(capsys):
    code, out, _ = run(capsys, "cce-check", "--game", fixture("corner_submatrix"),
                       "--distribution", "a3,b1=0.4;a3,b2=0.6")
    assert code == 0 and json.loads(out)["is_cce"]
    code, out, _ = run(capsys, "cce-check", "--game", fixture("three_by_three"),
                       "--support", "a1,b2;a1,b3;a2,b2;a2,b3")
    assert code == 1 and not json.loads(out)["feasible"]
    code, out, _ = run(capsys, "cce-check", "--game", fixture("matching_pennies"),
                       "--support", "a1,b1;a1,b2;a2,b1;a2,b2")
    body = json.loads(out)
    assert code == 0 and body["feasible"] and len(body["witness"]) == 4


def test_cli_verify_exit_codes(capsys):
    code, out, _ = run(capsys, "verify", "--game", fixture("cycle_and_pne"), "--memory", "2",
                       "--delta", "0.6", "--delta0", "0.85")
    assert code == 0 and json.loads(out)["status"] == "pass"
    code, _, err = run(capsys, "verify", "--game", fixture("coordination"), "--metric",
                       "cycle", "--memory", "2", "--delta", "0.1", "--delta0", "0.5")
    assert code == 2 and "m_bar = 5" in err
    code, _, err = run(capsys, "verify", "--game", fixture("tied_sinks"), "--memory", "2",
                       "--delta", "0.1", "--delta0", "0.05")
    assert code == 2 and "tie" in err
    code, _, err = run(capsys, "verify", "--game", fixture("coordination"), "--memory", "2",
                       "--delta", "0.1")
    assert code == 2 and "--delta0" in err


def test_cli_stochastic_game_input(capsys):
    code, out, _ = run(capsys, "analyze", "--game", fixture("small_stochastic_game"))
    assert code == 0 and json.loads(out)["num_profiles"] == 16
    code, out, _ = run(capsys, "analyze", "--game", fixture("small_stochastic_game"),
                       "--mode", "empirical", "--episodes", "200")
    assert code == 0


def test_cli_graph_rejected_where_game_needed(capsys):
    code, _, err = run(capsys, "simulate", "--game", fixture("line_graph"), "--memory", "1",
                       "--epsilon", "0.1", "--delta", "0.5")
    assert code == 2 and "graph" in err


def test_cli_missing_file(capsys, tmp_path):
    code, _, _ = run(capsys, "analyze", "--game", str(tmp_path / "none.json"))
    assert code == 2


def test_outputs_reproducible(capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    argv = ["simulate", "--game", fixture("three_by_three"), "--memory", "2", "--epsilon",
            "0.1", "--delta", "0.5", "--steps", "3000", "--seed", "9"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    assert "2023-11-14T22:13:20Z" in first
