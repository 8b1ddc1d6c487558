"""Command-line interface: ``sinkrank <verb> [options]``.

Verbs: analyze, rank, simulate, chain, cce-check, verify.  Results go to
``--out`` (default stdout) as JSON or CSV; ``--figure`` additionally
renders a PNG for rank, simulate and chain.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import io as sio
from .chain import (EPS_GRID, enumerate_history_chain,
                    stochastically_stable, verify_theorems)
from .equilibrium import cce_with_support_exists, is_cce
from .game_model import GameError, MetaGame
from .metrics import rank_graph
from .reporting import RunManifest, render_csv, render_json
from .response_graph import SBRGraph, build_sbr_graph, sink_equilibria, sink_membership
from .sbrd import FeasibleFunction, SBRDConfig, run_sbrd

EXIT_OK, EXIT_FAIL, EXIT_PRECONDITION = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--game", required=True, help="game, meta-game or graph JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=None,
                   help="output format (default depends on the verb)")
    p.add_argument("--weights", type=_floats, default=None,
                   help="agent weights summing to 1, e.g. 0.5,0.5")
    p.add_argument("--mode", choices=("exact", "empirical"), default="exact",
                   help="payoff evaluation for stochastic-game input")
    p.add_argument("--episodes", type=int, default=1000)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="sinkrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("analyze", parents=[common], help="SBR graph, sinks and PNEs")

    p = sub.add_parser("rank", parents=[common], help="rank profiles by a sink metric")
    p.add_argument("--metric", choices=("cycle", "memory"), default="cycle")
    p.add_argument("--memory", type=int, default=1)
    p.add_argument("--figure", help="write a bar chart PNG here")

    p = sub.add_parser("simulate", parents=[common], help="run the perturbed dynamics")
    p.add_argument("--memory", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--initial", help="initial profile label, e.g. a1,b2")
    p.add_argument("--figure", help="write an occupancy chart PNG here")

    p = sub.add_parser("chain", parents=[common], help="exact history-chain analysis")
    p.add_argument("--memory", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--epsilon-grid", type=_floats, default=list(EPS_GRID))
    p.add_argument("--delta0", type=float)
    p.add_argument("--delta-bar", type=float)
    p.add_argument("--metric", choices=("cycle", "memory"), default="memory")
    p.add_argument("--figure", help="write stationary mass against epsilon here")

    p = sub.add_parser("cce-check", parents=[common], help="coarse correlated equilibria")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--distribution",
                       help="profile=prob pairs separated by ';', e.g. 'a3,b1=0.4;a3,b2=0.6'")
    group.add_argument("--support", help="profiles separated by ';' (exact LP)")
    p.add_argument("--tol", type=float, default=1e-12)

    p = sub.add_parser("verify", parents=[common], help="check the stability theorems")
    p.add_argument("--metric", choices=("cycle", "memory"), default="memory")
    p.add_argument("--memory", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--delta0", type=float)
    p.add_argument("--delta-bar", type=float)
    p.add_argument("--epsilon-grid", type=_floats, default=list(EPS_GRID))
    return parser


# helpers ---------------------------------------------------------------------

def _load(args, allow_graph: bool = False):
    data, text = sio.read_document(args.game)
    kind, obj = sio.parse(data, text, args.game)
    if kind == "stochastic-game":
        obj = MetaGame.from_stochastic_game(obj, mode=args.mode, episodes=args.episodes,
                                            seed=args.seed)
        kind = "meta-game"
    if kind == "graph" and not allow_graph:
        raise GameError(f"{args.command} needs a game or meta-game, not a bare graph")
    return kind, obj, sio.digest(text)


def _manifest(args, input_digest: str) -> RunManifest:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("command",)}
    return RunManifest(args.command, input_digest, flags, args.seed)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _graph(kind, obj) -> SBRGraph:
    return obj if kind == "graph" else build_sbr_graph(obj)


def _profile_list(meta: MetaGame, text: str) -> list[tuple[int, ...]]:
    return [meta.parse_label(part) for part in text.split(";") if part.strip()]


# verbs -----------------------------------------------------------------------

def cmd_analyze(args) -> int:
    kind, obj, dig = _load(args, allow_graph=True)
    graph = _graph(kind, obj)
    sinks = sink_equilibria(graph)
    member = sink_membership(graph, sinks)
    labels = graph.labels
    manifest = _manifest(args, dig)
    if args.format == "csv":
        rows = [(labels[v], int(graph.pne[v]), member[v],
                 ";".join(labels[u] for u in graph.successors[v]))
                for v in range(graph.num_nodes)]
        _emit(args, render_csv(("profile", "pne", "sink_id", "successors"), rows, manifest))
        return EXIT_OK
    payload = {
        "kind": kind,
        "num_profiles": graph.num_nodes,
        "pne": [labels[v] for v in range(graph.num_nodes) if graph.pne[v]],
        "sinks": [{"id": q.sink_id, "size": len(q), "members": [labels[v] for v in q.members]}
                  for q in sinks],
        "profiles": [{"profile": labels[v], "pne": graph.pne[v], "sink_id": member[v],
                      "successors": [labels[u] for u in graph.successors[v]]}
                     for v in range(graph.num_nodes)],
    }
    _emit(args, render_json(payload, manifest))
    return EXIT_OK


def cmd_rank(args) -> int:
    kind, obj, dig = _load(args, allow_graph=True)
    graph = _graph(kind, obj)
    rows, report = rank_graph(graph, args.metric, args.memory,
                              args.weights if kind != "graph" else None)
    manifest = _manifest(args, dig)
    if args.format == "json":
        payload = {"metric": args.metric, "memory": args.memory,
                   "sink_values": list(report.sink_values),
                   "rows": [{"profile": r.profile, "sink_id": r.sink_id,
                             "metric": r.metric, "W": r.performance} for r in rows]}
        _emit(args, render_json(payload, manifest))
    else:
        _emit(args, render_csv(("profile", "sink_id", "metric", "W"),
                               [(r.profile, r.sink_id, r.metric, r.performance) for r in rows],
                               manifest))
    if args.figure:
        from .plotting import ranking_figure
        ranking_figure([r.profile for r in rows], [r.metric for r in rows],
                       [r.performance for r in rows], args.figure, args.metric)
    return EXIT_OK


def cmd_simulate(args) -> int:
    _, meta, dig = _load(args)
    cfg = SBRDConfig(args.epsilon, args.memory, args.mode, args.episodes, args.seed)
    graph = build_sbr_graph(meta)
    f = FeasibleFunction.for_game(meta, args.delta, args.weights, graph)
    initial = meta.parse_label(args.initial) if args.initial else None
    summary = run_sbrd(meta, cfg, args.steps, f, args.burn_in, initial, graph)
    member = sink_membership(graph, sink_equilibria(graph))
    freq = summary.frequency()
    rows = [(graph.labels[v], member[v], int(summary.profile_visits[v]), float(freq[v]))
            for v in range(graph.num_nodes)]
    manifest = _manifest(args, dig)
    if args.format == "json":
        payload = {"steps_counted": summary.steps,
                   "absorption_step": summary.absorption_step,
                   "exits_after_absorption": summary.exits_after_absorption,
                   "final_window": ([graph.labels[s] for s in summary.final_window]
                                    if summary.final_window else None),
                   "sink_visits": summary.sink_visits, "rcc_visits": summary.rcc_visits,
                   "rows": [dict(zip(("profile", "sink_id", "visits", "frequency"), r))
                            for r in rows]}
        _emit(args, render_json(payload, manifest))
    else:
        _emit(args, render_csv(("profile", "sink_id", "visits", "frequency"), rows, manifest))
    if args.figure:
        from .plotting import occupancy_figure
        occupancy_figure([r[0] for r in rows], [r[3] for r in rows], args.figure)
    return EXIT_OK


def cmd_chain(args) -> int:
    _, meta, dig = _load(args)
    graph = build_sbr_graph(meta)
    f = FeasibleFunction.for_game(meta, args.delta, args.weights, graph)
    stab = stochastically_stable(meta, args.memory, f, graph, args.epsilon_grid)
    chain = enumerate_history_chain(meta, args.memory, args.epsilon_grid[-1], f)
    rcc_of = {h: k for k, states in enumerate(stab.rcc_states) for h in states}
    manifest = _manifest(args, dig)
    states = sorted(stab.gamma)
    if args.format == "csv":
        header = ["state", "rcc", "gamma"] + [f"pi@{e:g}" for e in args.epsilon_grid]
        rows = [[chain.label(h), rcc_of.get(h), stab.gamma[h]]
                + [float(pi[h]) for pi in stab.stationary] for h in states]
        _emit(args, render_csv(header, rows, manifest))
    else:
        payload = {
            "memory": args.memory, "delta": args.delta, "num_states": chain.num_states,
            "gamma": [{"state": chain.label(h), "rcc": rcc_of.get(h), "gamma": stab.gamma[h]}
                      for h in states],
            "stable_states": [chain.label(h) for h in stab.stable_states],
            "stable_sinks": stab.stable_sinks,
            "rccs": [{"sink_id": r.sink_id, "size": len(r), "W": r.performance}
                     for r in stab.rccs],
            "stationary": [{"epsilon": e, "rcc_mass": list(mass)}
                           for e, mass in zip(args.epsilon_grid, stab.rcc_mass)],
            "survivors": [chain.label(h) for h in stab.survivors],
            "grid_matches_potential": stab.grid_agrees,
        }
        if args.delta0 is not None or args.delta_bar is not None:
            verdict = verify_theorems(meta, args.metric, args.delta, args.memory,
                                      args.delta0, args.delta_bar, args.weights,
                                      args.epsilon_grid)
            payload["verdict"] = {"status": verdict.status, "checks": verdict.checks,
                                  "messages": verdict.messages}
        _emit(args, render_json(payload, manifest))
    if args.figure:
        from .plotting import stationary_mass_figure
        stationary_mass_figure(args.epsilon_grid, stab.rcc_mass, args.figure,
                               [f"sink {r.sink_id}" for r in stab.rccs])
    return EXIT_OK


def cmd_cce_check(args) -> int:
    _, meta, dig = _load(args)
    manifest = _manifest(args, dig)
    if args.distribution:
        q = np.zeros(meta.num_profiles)
        for part in args.distribution.split(";"):
            if not part.strip():
                continue
            label, _, prob = part.rpartition("=")
            q[meta.index(meta.parse_label(label))] += float(Fraction(prob.strip()))
        ok, worst = is_cce(meta, q, args.tol)
        payload = {"check": "distribution", "is_cce": ok,
                   "worst": {"agent": worst.agent,
                             "deviation": meta.strategies[worst.agent][worst.deviation],
                             "gain": worst.gain}}
    else:
        support = _profile_list(meta, args.support)
        res = cce_with_support_exists(meta, support)
        ok = res.feasible
        payload = {"check": "support", "feasible": ok, "floor": str(res.floor),
                   "witness": ({meta.label(s): str(v) for s, v in res.witness.items()}
                               if res.witness else None)}
    _emit(args, render_json(payload, manifest))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    _, meta, dig = _load(args)
    if args.delta0 is None and args.delta_bar is None:
        raise GameError("verify needs --delta0 or --delta-bar")
    verdict = verify_theorems(meta, args.metric, args.delta, args.memory, args.delta0,
                              args.delta_bar, args.weights, args.epsilon_grid)
    payload = {"status": verdict.status, "exit_code": verdict.exit_code,
               "checks": verdict.checks, "messages": verdict.messages,
               "values": verdict.values}
    _emit(args, render_json(payload, _manifest(args, dig)))
    for msg in verdict.messages:
        print(msg, file=sys.stderr)
    return verdict.exit_code


COMMANDS = {"analyze": cmd_analyze, "rank": cmd_rank, "simulate": cmd_simulate,
            "chain": cmd_chain, "cce-check": cmd_cce_check, "verify": cmd_verify}
DEFAULT_FORMAT = {"analyze": "json", "rank": "csv", "simulate": "csv", "chain": "json",
                  "cce-check": "json", "verify": "json"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = DEFAULT_FORMAT[args.command]
    try:
        return COMMANDS[args.command](args)
    except (GameError, OSError) as exc:
        print(f"sinkrank {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
