"""Tabular Q-learning on (environment cell, automaton state) pairs.

Every step also updates the q-values of all other automaton states with the
rewards and successors the automaton would have produced there, so one
episode trains the whole product.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from afrai.automata import FiniteRewardAutomaton, Trace


class QueryKind(str, enum.Enum):
    MEMBERSHIP = "membership"
    EQUIVALENCE = "equivalence"


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.5
    gamma: float = 0.9
    epsilon: float = 0.1
    eplength: int = 200

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not isinstance(self.eplength, int) or self.eplength < 1:
            raise ValueError(f"eplength must be a positive integer, got {self.eplength}")


def episode_length_bound(n_env_states: int, n_automaton_states: int) -> int:
    """Episode length ``2**(|M|+1) * (|A|+1) - 1`` that guarantees convergence in the limit."""
    return 2 ** (n_env_states + 1) * (n_automaton_states + 1) - 1


class QTable:
    """q-values keyed by ``(x, w)`` with one list entry per action."""

    def __init__(self, n_actions: int, default: float = 0.0):
        self.n_actions = n_actions
        self.default = default
        self.values: dict = {}

    def row(self, x, w) -> list:
        row = self.values.get((x, w))
        return list(row) if row is not None else [self.default] * self.n_actions

    def get(self, x, w, a) -> float:
        row = self.values.get((x, w))
        return self.default if row is None else row[a]

    def set(self, x, w, a, value: float) -> None:
        row = self.values.get((x, w))
        if row is None:
            row = self.values[x, w] = [self.default] * self.n_actions
        row[a] = value

    def best(self, x, w) -> float:
        row = self.values.get((x, w))
        return self.default if row is None else max(row)

    def greedy(self, x, w) -> int:
        """Argmax action, smallest index on ties."""
        row = self.row(x, w)
        return row.index(max(row))

    def automaton_states(self) -> set:
        return {w for _, w in self.values}

    def __len__(self):
        return len(self.values)

    def dump(self) -> str:
        lines = ["x\tw\ta\tvalue"]
        for (x, w), row in sorted(self.values.items()):
            lines.extend(f"{x}\t{w}\t{a}\t{v!r}" for a, v in enumerate(row))
        return "\n".join(lines) + "\n"


def epsilon_greedy_action(q: QTable, x, w, actions, eps: float, rng):
    if not actions:
        raise ValueError("no actions to choose from")
    if rng.random() < eps:
        return actions[rng.randrange(len(actions))]
    row = q.values.get((x, w))
    if row is None:
        return actions[rng.randrange(len(actions))]
    best = max(row[a] for a in actions)
    ties = [a for a in actions if row[a] == best]
    return ties[0] if len(ties) == 1 else ties[rng.randrange(len(ties))]


def q_update(q: QTable, x, w, a, r: float, x2, w2, alpha: float, gamma: float) -> QTable:
    values = q.values
    nxt = values.get((x2, w2))
    target = r + gamma * (q.default if nxt is None else max(nxt))
    row = values.get((x, w))
    if row is None:
        row = values[x, w] = [q.default] * q.n_actions
    row[a] = (1.0 - alpha) * row[a] + alpha * target
    return q


def step(kind: QueryKind, fra: FiniteRewardAutomaton, q: QTable, x, w, env, hp: Hyperparams, rng):
    """One environment step plus q-updates for every automaton state.

    Returns ``(x', w', label, env_reward)``. The current-state update uses the
    automaton's reward in membership mode and the environment's reward in
    equivalence mode; the other states always use the automaton's rewards.
    """
    a = epsilon_greedy_action(q, x, w, env.actions, hp.epsilon, rng)
    outcome = env.step(a, rng)
    x2 = outcome.next_state.cell
    lab = outcome.label
    table = fra.table
    w2, r_auto = table[w][lab]
    r = r_auto if kind is QueryKind.MEMBERSHIP else float(outcome.reward)
    alpha, gamma = hp.alpha, hp.gamma
    q_update(q, x, w, a, r, x2, w2, alpha, gamma)
    for wh in range(fra.n_states):
        if wh != w:
            wh2, rh = table[wh][lab]
            q_update(q, x, wh, a, rh, x2, wh2, alpha, gamma)
    return x2, w2, lab, outcome.reward


def run_episode(kind: QueryKind, fra: FiniteRewardAutomaton, q: QTable, env, hp: Hyperparams, rng):
    """Run exactly ``hp.eplength`` steps from the initial state.

    The returned trace always carries the environment's rewards, also in
    membership mode where learning is driven by the query automaton.
    """
    x = env.reset()
    w = fra.initial
    labels, rewards = [], []
    for _ in range(hp.eplength):
        x, w, lab, r = step(kind, fra, q, x, w, env, hp, rng)
        labels.append(lab)
        rewards.append(r)
    return Trace(tuple(labels), tuple(rewards)), q
