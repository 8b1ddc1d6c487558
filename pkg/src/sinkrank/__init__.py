"""Sink-equilibrium ranking of meta-game policies and perturbed strict best
response dynamics over a finite memory."""

__version__ = "0.1.0"

from .game_model import (GameError, JointPolicy, MetaGame, PayoffEstimate, StochasticGame,
                         best_responses, estimate_payoff_empirical, meta_payoff,
                         policy_value)
from .response_graph import (SBRGraph, SinkEquilibrium, build_sbr_graph, is_sbrp,
                             pure_nash, sink_equilibria)
from .metrics import (cycle_metric, memory_metric, min_mean_cycle, rank_graph,
                      rank_strategies, strategy_performance)
from .equilibrium import cce_with_support_exists, is_cce
from .sbrd import FeasibleFunction, HistoryState, SBRDConfig, run_sbrd, sbrd_step
from .chain import (enumerate_history_chain, exploration_number, rcc_of_sink,
                    resistance_graph, stationary_distribution, stochastic_potential,
                    stochastically_stable, verify_theorems)

__all__ = [
    "GameError", "JointPolicy", "MetaGame", "PayoffEstimate", "StochasticGame",
    "best_responses", "estimate_payoff_empirical", "meta_payoff", "policy_value",
    "SBRGraph", "SinkEquilibrium", "build_sbr_graph", "is_sbrp", "pure_nash",
    "sink_equilibria", "cycle_metric", "memory_metric", "min_mean_cycle", "rank_graph",
    "rank_strategies", "strategy_performance", "cce_with_support_exists", "is_cce",
    "FeasibleFunction", "HistoryState", "SBRDConfig", "run_sbrd", "sbrd_step",
    "enumerate_history_chain", "exploration_number", "rcc_of_sink", "resistance_graph",
    "stationary_distribution", "stochastic_potential", "stochastically_stable",
    "verify_theorems",
]
