"""Ground truth for tests: product MDPs, dynamic programming, trace
enumeration, and an exact teacher for L*."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from afrai.automata import Dfa, FiniteRewardAutomaton, Trace, as_word, mealy_to_dfa
from afrai.lstar import ObservationTable, check_obs_table, hypothesis_fra


class ResourceLimitError(RuntimeError):
    pass


@dataclass
class ExplicitMdp:
    states: list
    actions: list
    transitions: dict  # (s, a) -> [(s', p)]
    rewards: dict  # (s, a, s') -> float
    initial: object = None
    _index: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self._index = {s: i for i, s in enumerate(self.states)}
        for (s, a), dist in self.transitions.items():
            total = sum(p for _, p in dist)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"transition row {(s, a)} sums to {total}")

    def index(self, s) -> int:
        return self._index[s]

    def matrices(self):
        """Per action: sparse transition matrix and expected immediate reward vector."""
        n = len(self.states)
        out = []
        for a in self.actions:
            rows, cols, probs = [], [], []
            reward = np.zeros(n)
            for i, s in enumerate(self.states):
                for s2, p in self.transitions[s, a]:
                    rows.append(i)
                    cols.append(self._index[s2])
                    probs.append(p)
                    reward[i] += p * self.rewards[s, a, s2]
            out.append((sparse.csr_matrix((probs, (rows, cols)), shape=(n, n)), reward))
        return out


def product_mdp(env, fra: FiniteRewardAutomaton) -> ExplicitMdp:
    """Synchronous product of the environment's cells and the automaton's states."""
    states = [(x, w) for x in range(env.n_states) for w in fra.states]
    transitions, rewards = {}, {}
    for x, w in states:
        for a in env.actions:
            dist = []
            for x2, p in env.transition_model(x, a):
                lab = env.label_of(x, a, x2)
                w2 = fra.delta[w, lab]
                dist.append(((x2, w2), p))
                rewards[(x, w), a, (x2, w2)] = float(fra.eta[w, lab])
            transitions[(x, w), a] = dist
    initial = (env.initial_cell, fra.initial)
    return ExplicitMdp(states, list(env.actions), transitions, rewards, initial)


def _greedy(qs: np.ndarray) -> np.ndarray:
    best = qs.max(axis=0)
    # first action within round-off of the best one
    return np.argmax(qs >= best - 1e-12, axis=0)


def value_iteration(m: ExplicitMdp, gamma: float, tol: float = 1e-8,
                    max_iter: int = 100_000, residuals: list | None = None):
    """Optimal discounted values and a greedy policy (smallest action index on ties)."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must be in (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    mats = m.matrices()
    v = np.zeros(len(m.states))
    for _ in range(max_iter):
        qs = np.stack([r + gamma * (p @ v) for p, r in mats])
        v_new = qs.max(axis=0)
        res = float(np.max(np.abs(v_new - v)))
        v = v_new
        if residuals is not None:
            residuals.append(res)
        if res < tol:
            break
    qs = np.stack([r + gamma * (p @ v) for p, r in mats])
    policy = _greedy(qs)
    values = {s: float(v[i]) for i, s in enumerate(m.states)}
    return values, {s: m.actions[policy[i]] for i, s in enumerate(m.states)}


def policy_evaluation(m: ExplicitMdp, policy: dict, gamma: float, tol: float = 1e-10) -> dict:
    mats = m.matrices()
    choice = np.array([m.actions.index(policy[s]) for s in m.states])
    v = np.zeros(len(m.states))
    while True:
        qs = np.stack([r + gamma * (p @ v) for p, r in mats])
        v_new = qs[choice, np.arange(len(m.states))]
        if np.max(np.abs(v_new - v)) < tol:
            v = v_new
            break
        v = v_new
    return {s: float(v[i]) for i, s in enumerate(m.states)}


def finite_horizon_value(m: ExplicitMdp, horizon: int) -> dict:
    """Optimal expected undiscounted reward collected in ``horizon`` steps."""
    mats = m.matrices()
    v = np.zeros(len(m.states))
    for _ in range(horizon):
        v = np.stack([r + p @ v for p, r in mats]).max(axis=0)
    return {s: float(v[i]) for i, s in enumerate(m.states)}


def episode_optimum(env, horizon: int) -> float:
    """Best expected reward per episode of ``horizon`` steps from the start state."""
    m = product_mdp(env, env.task)
    return finite_horizon_value(m, horizon)[m.initial]


def enumerate_attainable_traces(env, fra: FiniteRewardAutomaton, max_len: int,
                                limit: int = 200_000) -> set:
    """Every trace of length <= ``max_len`` that some action sequence produces with p > 0."""
    start = (env.initial_cell, fra.initial, ())
    frontier = {start}
    traces = {Trace()}
    for _ in range(max_len):
        nxt = set()
        for x, w, word in frontier:
            for a in env.actions:
                for x2, p in env.transition_model(x, a):
                    if p <= 0:
                        continue
                    lab = env.label_of(x, a, x2)
                    w2, r = fra.delta[w, lab], fra.eta[w, lab]
                    nxt.add((x2, w2, word + ((lab, r),)))
                    if len(nxt) > limit:
                        raise ResourceLimitError(
                            f"more than {limit} partial traces; lower max_len"
                        )
        frontier = nxt
        traces.update(Trace.from_word(word) for _, _, word in frontier)
    return traces


def distinguishing_word(d1: Dfa, d2: Dfa):
    """Shortest word accepted by exactly one DFA, or None.

    Among the shortest ones, a word that ``d1`` accepts is preferred, so with
    ``d1`` the target the answer is a trace the target can actually produce.
    """
    if set(d1.alphabet) != set(d2.alphabet):
        raise ValueError("DFAs must share an alphabet")
    alphabet = d1.alphabet
    start = (d1.initial, d2.initial)
    parent = {start: None}
    level = [start]

    def spell(pair):
        word = []
        while parent[pair] is not None:
            pair, sym = parent[pair]
            word.append(sym)
        return tuple(reversed(word))

    while level:
        hits = [p for p in level if (p[0] in d1.accepting) != (p[1] in d2.accepting)]
        if hits:
            best = next((p for p in hits if p[0] in d1.accepting), hits[0])
            return spell(best)
        nxt = []
        for pair in level:
            v1, v2 = pair
            for sym in alphabet:
                succ = (d1.delta[v1, sym], d2.delta[v2, sym])
                if succ not in parent:
                    parent[succ] = (pair, sym)
                    nxt.append(succ)
        level = nxt
    return None


def minimal_dfa_size(dfa: Dfa) -> int:
    """Number of states of the minimal DFA (reachable part, Moore refinement)."""
    reach = {dfa.initial}
    queue = deque([dfa.initial])
    while queue:
        v = queue.popleft()
        for sym in dfa.alphabet:
            u = dfa.delta[v, sym]
            if u not in reach:
                reach.add(u)
                queue.append(u)
    states = sorted(reach)
    block = {v: int(v in dfa.accepting) for v in states}
    while True:
        sig = {v: (block[v],) + tuple(block[dfa.delta[v, s]] for s in dfa.alphabet) for v in states}
        ids = {}
        new = {v: ids.setdefault(sig[v], len(ids)) for v in states}
        if len(ids) == len(set(block.values())):
            return len(ids)
        block = new


class ExactTeacher:
    """Answers L* queries from a known target automaton."""

    def __init__(self, target: FiniteRewardAutomaton):
        self.target = target
        self.dfa = mealy_to_dfa(target)
        self.membership_queries = 0
        self.equivalence_queries = 0

    def membership(self, word) -> int:
        self.membership_queries += 1
        return int(self.dfa.accepts(as_word(word)))

    def equivalence(self, hypothesis: FiniteRewardAutomaton):
        self.equivalence_queries += 1
        rewards = set(self.target.reward_alphabet) | set(hypothesis.reward_alphabet)
        if set(hypothesis.input_alphabet) != set(self.target.input_alphabet):
            raise ValueError("hypothesis and target read different labels")
        return distinguishing_word(
            mealy_to_dfa(self.target, rewards), mealy_to_dfa(hypothesis, rewards)
        )


def exact_teacher(target: FiniteRewardAutomaton) -> ExactTeacher:
    return ExactTeacher(target)


def learn_with_teacher(teacher: ExactTeacher, max_rounds: int = 1000):
    """Plain L* against an exact teacher; returns ``(hypothesis, table)``."""
    target = teacher.target
    table = ObservationTable(target.input_alphabet, target.reward_alphabet)
    for _ in range(max_rounds):
        while True:
            for w in table.unknown_words():
                table.answer(w, teacher.membership(w))
            if table.is_consistent() and table.is_closed():
                break
            check_obs_table(table)
        hyp = hypothesis_fra(table, target.input_alphabet)
        cex = teacher.equivalence(hyp)
        if cex is None:
            return hyp, table
        table.add_counterexample(cex)
    raise RuntimeError(f"no agreement after {max_rounds} equivalence queries")
