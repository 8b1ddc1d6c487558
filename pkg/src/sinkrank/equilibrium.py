"""Coarse correlated equilibria: verification and support-restricted existence."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .game_model import GameError, MetaGame

SUPPORT_FLOOR = Fraction(1, 10**6)
LP_VARIABLE_CAP = 200


@dataclass(frozen=True)
class Violation:
    agent: int
    deviation: int
    gain: float   # deviation payoff minus equilibrium payoff


def _as_distribution(meta: MetaGame, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.size != meta.num_profiles:
        raise GameError(f"distribution has {q.size} entries, need {meta.num_profiles}")
    q = q.reshape(meta.shape)
    if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
        raise GameError("distribution must be non-negative and sum to 1")
    return q


def cce_gains(meta: MetaGame, q) -> list[np.ndarray]:
    """For each agent, the expected gain of every fixed deviation under ``q``."""
    q = _as_distribution(meta, q)
    table = meta.payoff_table()
    gains = []
    for i in range(meta.num_agents):
        J = table[..., i]
        current = float((J * q).sum())
        others = q.sum(axis=i)                      # marginal over s^{-i}
        moved = np.moveaxis(J, i, 0)                # (|S^i|, ...others)
        deviation = (moved * others[None]).reshape(meta.shape[i], -1).sum(axis=1)
        gains.append(deviation - current)
    return gains


def is_cce(meta: MetaGame, q, tol: float = 1e-12) -> tuple[bool, Violation]:
    """Check the coarse correlated equilibrium inequalities.

    Returns the verdict together with the most violated (or tightest)
    deviation constraint.
    """
    worst = None
    for i, gain in enumerate(cce_gains(meta, q)):
        k = int(np.argmax(gain))
        if worst is None or gain[k] > worst.gain:
            worst = Violation(i, k, float(gain[k]))
    return worst.gain <= tol, worst


def rational(x) -> Fraction:
    """Rationalize a payoff; floats are snapped to the nearest fraction with
    denominator at most 1e9 (recovers decimal inputs such as 0.95)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x)).limit_denominator(10**9)


@dataclass(frozen=True)
class SupportResult:
    feasible: bool
    witness: dict[tuple[int, ...], Fraction] | None
    floor: Fraction


def cce_with_support_exists(meta: MetaGame, support: Sequence[Sequence[int]],
                            floor: Fraction = SUPPORT_FLOOR,
                            payoffs=None) -> SupportResult:
    """Decide whether some CCE has exactly the given support.

    Positivity on the support is encoded as ``q_s >= floor``.  The LP is
    solved exactly over the rationals.  ``payoffs`` may supply an exact
    (Fraction-valued) payoff tensor of shape ``meta.shape + (n,)``.
    """
    support = [tuple(int(k) for k in s) for s in support]
    if not support:
        raise GameError("support must be nonempty")
    if len(set(support)) != len(support):
        raise GameError("support has repeated profiles")
    if len(support) > LP_VARIABLE_CAP:
        raise GameError(f"support of {len(support)} exceeds LP cap {LP_VARIABLE_CAP}")
    for s in support:
        meta._check(s)
    floor = Fraction(floor)
    table = meta.payoff_table() if payoffs is None else np.asarray(payoffs, dtype=object)

    def payoff(s, i):
        return rational(table[s + (i,)])

    k = len(support)
    rest = 1 - k * floor
    if rest < 0:
        return SupportResult(False, None, floor)
    # q_s = floor + y_s, y >= 0.
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    senses: list[str] = []
    rows.append([Fraction(1)] * k)
    rhs.append(rest)
    senses.append("=")
    for i in range(meta.num_agents):
        for dev in range(meta.shape[i]):
            coeffs = []
            for s in support:
                alt = s[:i] + (dev,) + s[i + 1:]
                coeffs.append(payoff(s, i) - payoff(alt, i))
            # sum_s a_s (floor + y_s) >= 0
            rows.append(coeffs)
            rhs.append(-floor * sum(coeffs))
            senses.append(">=")
    y = exact_feasible_point(rows, senses, rhs)
    if y is None:
        return SupportResult(False, None, floor)
    witness = {s: floor + y[t] for t, s in enumerate(support)}
    return SupportResult(True, witness, floor)


def exact_feasible_point(rows, senses, rhs) -> list[Fraction] | None:
    """Find ``y >= 0`` with ``rows @ y (sense) rhs`` using a phase-one simplex
    over rationals with Bland's rule; None when infeasible."""
    num_y = len(rows[0]) if rows else 0
    # Add a surplus column for every inequality, then flip rows to make rhs >= 0.
    ineq = [r for r, sense in enumerate(senses) if sense != "="]
    num_cols = num_y + len(ineq)
    A: list[list[Fraction]] = []
    b: list[Fraction] = []
    for r, (row, sense, val) in enumerate(zip(rows, senses, rhs)):
        full = [Fraction(x) for x in row] + [Fraction(0)] * len(ineq)
        if sense != "=":
            slot = num_y + ineq.index(r)
            full[slot] = Fraction(-1) if sense == ">=" else Fraction(1)
        val = Fraction(val)
        if val < 0:
            full = [-x for x in full]
            val = -val
        A.append(full)
        b.append(val)
    m = len(A)
    # Artificial variables form the initial basis.
    tableau = [A[r] + [Fraction(int(r == c)) for c in range(m)] + [b[r]] for r in range(m)]
    total = num_cols + m
    basis = [num_cols + r for r in range(m)]
    # Phase-one objective: minimise the sum of artificials (row of reduced costs).
    cost = [Fraction(0)] * num_cols + [Fraction(1)] * m + [Fraction(0)]
    for r in range(m):
        cost = [c - t for c, t in zip(cost, tableau[r])]
    while True:
        enter = next((c for c in range(total) if cost[c] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for r in range(m):
            a = tableau[r][enter]
            if a > 0:
                ratio = tableau[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    leave, best = r, ratio
        if leave is None:
            break  # unbounded direction; cannot occur for phase one
        pivot = tableau[leave][enter]
        tableau[leave] = [x / pivot for x in tableau[leave]]
        for r in range(m):
            if r != leave and tableau[r][enter] != 0:
                factor = tableau[r][enter]
                tableau[r] = [x - factor * p for x, p in zip(tableau[r], tableau[leave])]
        factor = cost[enter]
        cost = [x - factor * p for x, p in zip(cost, tableau[leave])]
        basis[leave] = enter
    if -cost[-1] != 0:
        return None
    values = [Fraction(0)] * total
    for r, var in enumerate(basis):
        values[var] = tableau[r][-1]
    return values[:num_y]
