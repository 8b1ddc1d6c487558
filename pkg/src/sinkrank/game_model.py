"""Stochastic games, their meta-games, and payoff evaluation.

A stochastic game is stored densely:

* ``transition[x, a_1, ..., a_n, x']`` is the probability of moving from
  state ``x`` to ``x'`` under joint action ``a``;
* ``rewards[i, x, a_1, ..., a_n]`` is agent ``i``'s immediate reward.

A meta-game is a normal-form game whose strategies are stationary
deterministic policies of the underlying stochastic game (or arbitrary
labelled strategies when the payoff table is given explicitly).  Payoffs
live in a tensor of shape ``(|S^1|, ..., |S^n|, n)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

PROFILE_CAP = 4096
EXACT_TIE_TOL = 1e-9
STD_ERR_MARGIN = 3.0
TRUNCATION_BOUND = 1e-6


class GameError(ValueError):
    """Raised for malformed games, profiles or oversize enumerations."""


@dataclass(frozen=True)
class StochasticGame:
    """Finite discounted stochastic game ``(N, X, A, P, R, beta)``."""

    transition: np.ndarray
    rewards: np.ndarray
    discounts: np.ndarray
    state_names: tuple[str, ...] = ()
    action_names: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=float)
        rewards = np.asarray(self.rewards, dtype=float)
        discounts = np.atleast_1d(np.asarray(self.discounts, dtype=float))
        n = discounts.shape[0]
        if n < 1:
            raise GameError("a game needs at least one agent")
        if transition.ndim != n + 2:
            raise GameError(
                f"transition must have {n + 2} axes (x, a^1..a^{n}, x'), "
                f"got {transition.ndim}")
        num_states = transition.shape[0]
        if transition.shape[-1] != num_states:
            raise GameError("transition first and last axes must both index states")
        if rewards.shape != (n,) + transition.shape[:-1]:
            raise GameError(
                f"rewards shape {rewards.shape} does not match "
                f"{(n,) + transition.shape[:-1]}")
        if np.any(transition < 0):
            raise GameError("transition probabilities must be non-negative")
        sums = transition.sum(axis=-1)
        if np.max(np.abs(sums - 1.0)) > 1e-12:
            raise GameError("transition rows must sum to 1 within 1e-12")
        if not np.all(np.isfinite(rewards)):
            raise GameError("reward table must be fully populated")
        if np.any(discounts <= 0) or np.any(discounts >= 1):
            raise GameError("discount factors must lie in (0, 1)")
        for arr in (transition, rewards, discounts):
            arr.setflags(write=False)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "discounts", discounts)
        if not self.state_names:
            object.__setattr__(
                self, "state_names", tuple(f"x{k}" for k in range(num_states)))
        if not self.action_names:
            object.__setattr__(self, "action_names", tuple(
                tuple(f"a{k}" for k in range(size))
                for size in transition.shape[1:-1]))

    @property
    def num_agents(self) -> int:
        return self.discounts.shape[0]

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> tuple[int, ...]:
        return self.transition.shape[1:-1]


@dataclass(frozen=True)
class JointPolicy:
    """Per-agent stationary deterministic policies; ``actions[i][x]`` is the
    action index agent ``i`` plays in state ``x``."""

    actions: tuple[tuple[int, ...], ...]

    def validate(self, game: StochasticGame) -> None:
        if len(self.actions) != game.num_agents:
            raise GameError("policy must give one map per agent")
        for i, acts in enumerate(self.actions):
            if len(acts) != game.num_states:
                raise GameError(f"agent {i} policy must cover every state")
            for a in acts:
                if not 0 <= a < game.num_actions[i]:
                    raise GameError(f"agent {i} action {a} out of range")


def _policy_chain(game: StochasticGame, policy: JointPolicy):
    policy.validate(game)
    states = np.arange(game.num_states)
    index = (states,) + tuple(np.asarray(a) for a in policy.actions)
    P = game.transition[index]                    # (X, X')
    R = game.rewards[(slice(None),) + index]      # (n, X)
    return P, R


def policy_value(game: StochasticGame, policy: JointPolicy, agent: int) -> np.ndarray:
    """Exact discounted value ``V^i_s(x)`` for every state.

    Solves ``(I - beta P_s) V = R_s``; the system is nonsingular for any
    discount in (0, 1).
    """
    if not 0 <= agent < game.num_agents:
        raise GameError(f"agent {agent} out of range")
    P, R = _policy_chain(game, policy)
    beta = game.discounts[agent]
    A = np.eye(game.num_states) - beta * P
    return np.linalg.solve(A, R[agent])


def enumerate_policies(game: StochasticGame, agent: int) -> list[tuple[int, ...]]:
    """All stationary deterministic policies of one agent (``|A^i|^|X|``)."""
    return list(itertools.product(range(game.num_actions[agent]),
                                  repeat=game.num_states))


def truncation_horizon(game: StochasticGame, bound: float = TRUNCATION_BOUND) -> int:
    """Smallest T with ``beta^T R_max / (1 - beta) <= bound`` for all agents."""
    r_max = float(np.max(np.abs(game.rewards)))
    if r_max == 0.0:
        return 1
    horizon = 1
    for beta in game.discounts:
        need = math.log(bound * (1.0 - beta) / r_max) / math.log(beta)
        horizon = max(horizon, int(math.ceil(need)))
    return horizon


@dataclass(frozen=True)
class PayoffEstimate:
    mean: np.ndarray
    std_err: np.ndarray
    episodes: int
    horizon: int


def estimate_payoff_empirical(game: StochasticGame, policy: JointPolicy,
                              episodes: int, seed: int) -> PayoffEstimate:
    """Monte-Carlo estimate of the meta-payoff ``J(s)``.

    Episode ``k`` starts in state ``k mod |X|`` and draws its transitions
    from its own stream seeded by ``(seed, k)``.  The estimate is stratified
    by initial state: per-state sample means are averaged uniformly, which
    matches the uniform average over initial states defining ``J``.  With
    fewer episodes than states only the visited start states contribute.
    """
    if episodes < 1:
        raise GameError("episodes must be >= 1")
    P, R = _policy_chain(game, policy)
    horizon = truncation_horizon(game)
    num_states = game.num_states
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0

    uniforms = np.stack([np.random.default_rng([seed, k]).random(horizon)
                         for k in range(episodes)])
    starts = np.arange(episodes) % num_states
    state = starts.copy()
    returns = np.zeros((game.num_agents, episodes))
    disc = np.ones(game.num_agents)
    for t in range(horizon):
        returns += disc[:, None] * R[:, state]
        disc = disc * game.discounts
        u = uniforms[:, t]
        state = (u[:, None] >= cum[state]).sum(axis=1)
        np.minimum(state, num_states - 1, out=state)

    means, variances = [], []
    for x in range(num_states):
        sample = returns[:, starts == x]
        count = sample.shape[1]
        if count == 0:
            continue
        means.append(sample.mean(axis=1))
        var = sample.var(axis=1, ddof=1) / count if count > 1 else np.zeros(game.num_agents)
        variances.append(var)
    k = len(means)
    mean = np.mean(means, axis=0)
    std_err = np.sqrt(np.sum(variances, axis=0)) / k
    return PayoffEstimate(mean=mean, std_err=std_err, episodes=episodes, horizon=horizon)


class MetaGame:
    """Normal-form game over finite strategy sets with payoff vectors ``J(s)``.

    Payoffs come from an explicit table, from exact evaluation of a backing
    stochastic game, or lazily from Monte-Carlo estimates recorded in an
    empirical payoff table.  Each profile's estimate uses a seed derived from
    ``(seed, flat profile index)`` so the table does not depend on the order
    in which profiles are first requested.
    """

    def __init__(self, strategies: Sequence[Sequence[str]], payoffs=None,
                 std_err=None, *, estimator: Callable | None = None,
                 source: StochasticGame | None = None,
                 policies: Sequence[Sequence[tuple[int, ...]]] | None = None,
                 profile_cap: int = PROFILE_CAP):
        self.strategies = tuple(tuple(str(s) for s in names) for names in strategies)
        if not self.strategies or any(len(names) == 0 for names in self.strategies):
            raise GameError("every agent needs a nonempty strategy set")
        self.shape = tuple(len(names) for names in self.strategies)
        self.num_profiles = int(np.prod(self.shape))
        if self.num_profiles > profile_cap:
            raise GameError(
                f"{self.num_profiles} joint profiles exceed the cap of {profile_cap}")
        self.source = source
        self.policies = policies
        self._estimator = estimator
        n = self.num_agents
        if payoffs is None:
            if estimator is None:
                raise GameError("need either a payoff table or an estimator")
            self._payoff = np.full(self.shape + (n,), np.nan)
            self._std_err = np.full(self.shape + (n,), np.nan)
            self.estimated = True
        else:
            table = np.asarray(payoffs, dtype=float)
            if table.shape != self.shape + (n,):
                raise GameError(
                    f"payoff table shape {table.shape} != {self.shape + (n,)}")
            if not np.all(np.isfinite(table)):
                raise GameError("payoff table has non-finite entries")
            self._payoff = table.copy()
            self._payoff.setflags(write=False)
            if std_err is None:
                self._std_err = None
                self.estimated = False
            else:
                se = np.asarray(std_err, dtype=float)
                if se.shape != table.shape or np.any(se < 0):
                    raise GameError("std_err must match payoffs and be non-negative")
                self._std_err = se.copy()
                self.estimated = True

    # construction helpers -------------------------------------------------
    @classmethod
    def from_stochastic_game(cls, game: StochasticGame, *, mode: str = "exact",
                             episodes: int = 1000, seed: int = 0,
                             profile_cap: int = PROFILE_CAP) -> "MetaGame":
        """Meta-game whose strategies are all stationary deterministic policies."""
        policies = [enumerate_policies(game, i) for i in range(game.num_agents)]
        total = math.prod(len(p) for p in policies)
        if total > profile_cap:
            raise GameError(
                f"{total} joint policies exceed the cap of {profile_cap}; "
                "enumeration is |A^i|^|X| per agent")
        names = [["".join(game.action_names[i][a] for a in pol) for pol in pols]
                 for i, pols in enumerate(policies)]
        for i, agent_names in enumerate(names):
            if len(set(agent_names)) != len(agent_names):
                names[i] = ["-".join(map(str, pol)) for pol in policies[i]]

        def joint(profile):
            return JointPolicy(tuple(policies[i][k] for i, k in enumerate(profile)))

        if mode == "exact":
            shape = tuple(len(p) for p in policies)
            table = np.zeros(shape + (game.num_agents,))
            for profile in itertools.product(*(range(k) for k in shape)):
                pol = joint(profile)
                for i in range(game.num_agents):
                    table[profile + (i,)] = policy_value(game, pol, i).mean()
            return cls(names, table, source=game, policies=policies,
                       profile_cap=profile_cap)
        if mode == "empirical":
            shape = tuple(len(p) for p in policies)

            def estimator(profile):
                flat = int(np.ravel_multi_index(profile, shape))
                return estimate_payoff_empirical(game, joint(profile), episodes,
                                                 seed=_mix_seed(seed, flat))
            return cls(names, None, estimator=estimator, source=game,
                       policies=policies, profile_cap=profile_cap)
        raise GameError(f"unknown mode {mode!r}")

    # basic structure ------------------------------------------------------
    @property
    def num_agents(self) -> int:
        return len(self.strategies)

    def profiles(self) -> list[tuple[int, ...]]:
        """All joint profiles in lexicographic (flat index) order."""
        return list(itertools.product(*(range(k) for k in self.shape)))

    def index(self, profile: Sequence[int]) -> int:
        profile = self._check(profile)
        return int(np.ravel_multi_index(profile, self.shape))

    def profile(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.num_profiles:
            raise GameError(f"unknown profile index {flat}")
        return tuple(int(k) for k in np.unravel_index(flat, self.shape))

    def label(self, profile) -> str:
        if isinstance(profile, (int, np.integer)):
            profile = self.profile(int(profile))
        return ",".join(self.strategies[i][k] for i, k in enumerate(profile))

    def parse_label(self, text: str) -> tuple[int, ...]:
        parts = [p.strip() for p in text.strip("() ").split(",")]
        if len(parts) != self.num_agents:
            raise GameError(f"cannot parse profile {text!r}")
        try:
            return tuple(self.strategies[i].index(p) for i, p in enumerate(parts))
        except ValueError:
            raise GameError(f"unknown strategy in profile {text!r}") from None

    def _check(self, profile) -> tuple[int, ...]:
        profile = tuple(int(k) for k in profile)
        if len(profile) != self.num_agents or any(
                not 0 <= k < size for k, size in zip(profile, self.shape)):
            raise GameError(f"unknown profile {profile}")
        return profile

    # payoffs ---------------------------------------------------------------
    def _fill(self, profile: tuple[int, ...]) -> None:
        if self._estimator is not None and np.isnan(self._payoff[profile][0]):
            est = self._estimator(profile)
            self._payoff[profile] = est.mean
            self._std_err[profile] = est.std_err

    def payoff(self, profile) -> np.ndarray:
        profile = self._check(profile)
        self._fill(profile)
        return self._payoff[profile].copy()

    def std_err(self, profile) -> np.ndarray:
        profile = self._check(profile)
        if self._std_err is None:
            return np.zeros(self.num_agents)
        self._fill(profile)
        return self._std_err[profile].copy()

    def payoff_table(self) -> np.ndarray:
        """Full payoff tensor; forces estimation of every profile."""
        if self._estimator is not None:
            for profile in self.profiles():
                self._fill(profile)
        table = self._payoff.copy()
        table.setflags(write=False)
        return table

    def std_err_table(self) -> np.ndarray:
        if self._std_err is None:
            return np.zeros(self.shape + (self.num_agents,))
        self.payoff_table()
        return self._std_err.copy()

    def max_payoff(self) -> float:
        return float(np.max(self.payoff_table()))

    def submatrix(self, keep: Sequence[Sequence[int]]) -> "MetaGame":
        """Restriction to a subset of each agent's strategies."""
        keep = [list(k) for k in keep]
        table = self.payoff_table()[np.ix_(*keep)]
        names = [[self.strategies[i][k] for k in ks] for i, ks in enumerate(keep)]
        se = None
        if self._std_err is not None:
            se = self.std_err_table()[np.ix_(*keep)]
        return MetaGame(names, table, se)

    def tie_tolerance(self, a, b, agent: int) -> float:
        """Tolerance for comparing agent payoffs of two profiles."""
        if not self.estimated:
            return EXACT_TIE_TOL
        se = math.hypot(self.std_err(a)[agent], self.std_err(b)[agent])
        return max(EXACT_TIE_TOL, STD_ERR_MARGIN * se)

    def improves(self, new, old, agent: int) -> bool:
        """``J^agent(new) > J^agent(old)`` beyond the tie tolerance."""
        diff = self.payoff(new)[agent] - self.payoff(old)[agent]
        return diff > self.tie_tolerance(new, old, agent)

    def __repr__(self):
        return f"MetaGame(shape={self.shape}, estimated={self.estimated})"


def _mix_seed(seed: int, flat: int) -> int:
    return int(np.random.SeedSequence([seed, flat]).generate_state(1)[0])


def meta_payoff(meta: MetaGame, profile) -> np.ndarray:
    """Payoff vector ``J(s)`` of a joint profile (tuple or flat index)."""
    if isinstance(profile, (int, np.integer)):
        profile = meta.profile(int(profile))
    return meta.payoff(profile)


def best_responses(meta: MetaGame, agent: int, profile,
                   tie_tol: float | None = None) -> list[int]:
    """Best responses of ``agent`` to the other coordinates of ``profile``.

    ``profile`` is a full joint profile; the agent's own coordinate is
    ignored.  With ``tie_tol=None`` exact tables use 1e-9 and estimated
    tables use three combined standard errors against the maximizer.
    """
    profile = meta._check(profile)
    if tie_tol is not None and tie_tol < 0:
        raise GameError("tie_tol must be non-negative")
    candidates = []
    for k in range(meta.shape[agent]):
        alt = profile[:agent] + (k,) + profile[agent + 1:]
        candidates.append((alt, meta.payoff(alt)[agent]))
    best_alt, best = max(candidates, key=lambda c: c[1])
    out = []
    for k, (alt, value) in enumerate(candidates):
        tol = tie_tol if tie_tol is not None else meta.tie_tolerance(alt, best_alt, agent)
        if value >= best - tol:
            out.append(k)
    return out


def as_weights(weights, num_agents: int) -> np.ndarray:
    """Validate a weight vector: non-negative entries summing to one."""
    if weights is None:
        return np.full(num_agents, 1.0 / num_agents)
    w = np.asarray(weights, dtype=float)
    if w.shape != (num_agents,):
        raise GameError(f"need {num_agents} weights, got {w.shape}")
    if np.any(w < 0):
        raise GameError("weights must be non-negative")
    if abs(w.sum() - 1.0) > 1e-12:
        raise GameError(
            f"weights sum to {w.sum():.12g}; normalize them to sum to 1 "
            f"(e.g. {', '.join(f'{x / w.sum():.4g}' for x in w)})" if w.sum() > 0
            else "weights sum to 0")
    return w

