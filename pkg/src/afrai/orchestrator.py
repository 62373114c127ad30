"""Active reward-automaton inference interleaved with Q-learning.

The learner keeps an L* table whose membership queries are answered by
steering the agent with a query automaton, and whose equivalence queries
are answered by exploiting the current hypothesis until the environment
pays a reward the hypothesis did not predict.
"""

from __future__ import annotations

import logging
import random
from array import array
from dataclasses import dataclass, field

from afrai.automata import (
    FiniteRewardAutomaton,
    Trace,
    build_query_fra,
    constant_fra,
    drop_repeats,
    has_rewarded_repeat,
)
from afrai.lstar import (
    ObservationTable,
    SampleStore,
    check_nsample,
    check_obs_table,
    hypothesis_fra,
    traces_inconsistent,
)
from afrai.rl import Hyperparams, QTable, QueryKind, run_episode

log = logging.getLogger(__name__)

BOOTSTRAP, MEMBERSHIP, EQUIVALENCE = 0, 1, 2
PHASE_NAMES = ("bootstrap", "membership", "equivalence")


class BootstrapError(RuntimeError):
    pass


class MetricsLog:
    """Per-step environment reward, phase, hypothesis size and answered-query count."""

    def __init__(self):
        self.rewards = array("d")
        self.phases = array("b")
        self.hyp_states = array("i")
        self.queries = array("i")

    def record(self, rewards, phase: int, hyp_states: int, queries: int) -> None:
        n = len(rewards)
        self.rewards.extend(float(r) for r in rewards)
        self.phases.extend([phase] * n)
        self.hyp_states.extend([hyp_states] * n)
        self.queries.extend([queries] * n)

    def __len__(self):
        return len(self.rewards)

    def rows(self):
        """Yield ``(step, reward, phase, hyp_states, queries)`` with steps from 1."""
        for i in range(len(self.rewards)):
            yield (i + 1, self.rewards[i], PHASE_NAMES[self.phases[i]],
                   self.hyp_states[i], self.queries[i])


@dataclass
class AfraiResult:
    hypothesis: FiniteRewardAutomaton
    q_h: QTable
    metrics: MetricsLog
    steps: int
    table: ObservationTable
    store: SampleStore
    counterexamples: list = field(default_factory=list)
    queries_answered: int = 0


def find_counterexample(trace, hypothesis: FiniteRewardAutomaton):
    """Shortest prefix of ``trace`` whose last reward the hypothesis gets wrong."""
    w = hypothesis.initial
    for i, (lab, r) in enumerate(zip(trace.labels, trace.rewards)):
        w, predicted = hypothesis.step(w, lab)
        if predicted != r:
            return trace.prefix(i + 1)
    return None


class Afrai:
    """One inference-and-learning run; owns its table, caches, q-tables and RNG."""

    def __init__(
        self,
        env,
        hp: Hyperparams = Hyperparams(),
        budget_c: int = 500,
        total_steps: int = 1_000_000,
        rng=None,
        compress_empty: bool = True,
        compress_repeats: bool = True,
        keep_inconsistent: bool = False,
        bootstrap_cap: int | None = 10_000,
        warm_start_q_m: bool = True,
    ):
        if budget_c < 0:
            raise ValueError("budget_c must be non-negative")
        self.env = env
        self.hp = hp
        self.budget_c = budget_c
        self.total_steps = total_steps
        self.rng = rng if isinstance(rng, random.Random) else random.Random(rng)
        self.compress_empty = compress_empty
        self.compress_repeats = compress_repeats
        self.keep_inconsistent = keep_inconsistent
        self.bootstrap_cap = bootstrap_cap
        self.warm_start_q_m = warm_start_q_m

        labels = [lab for lab in env.labels if lab or not compress_empty]
        self.table = ObservationTable(labels, (0, 1))
        self.store = SampleStore()
        self.n_actions = len(env.actions)
        self.q_h = QTable(self.n_actions)
        self.q_m_store: dict = {}
        self.hypothesis = constant_fra(env.labels, 0)
        self.steps = 0
        self.metrics = MetricsLog()
        self.queries_answered = 0
        self.counterexamples: list = []
        # normal form -> table words that share its answer
        self._aliases: dict = {}

    @property
    def exhausted(self) -> bool:
        return self.steps >= self.total_steps

    def _episode(self, kind: QueryKind, fra, q: QTable, phase: int) -> Trace:
        trace, _ = run_episode(kind, fra, q, self.env, self.hp, self.rng)
        self.steps += len(trace)
        self.metrics.record(trace.rewards, phase, self.hypothesis.n_states, self.queries_answered)
        if self.compress_empty:
            trace = trace.compressed()
        if self.compress_repeats:
            trace = trace.without_repeats()
        self.table.extend_alphabet(trace.labels, trace.rewards)
        return trace

    def _answer(self, zeta, bit: int) -> None:
        self.table.answer(zeta, bit)
        for alias in self._aliases.get(zeta, ()):
            self.table.answer(alias, bit)
        self.queries_answered += 1

    def _check_nsample(self, trace) -> bool:
        before = list(self.store.nsample)
        changed = check_nsample(trace, self.store, self.table)
        if changed and self._aliases:
            for zeta in set(before).difference(self.store.nsample):
                for alias in self._aliases.get(zeta, ()):
                    self.table.T[alias] = 1
        return changed

    def _normal_form(self, zeta) -> tuple:
        return drop_repeats(zeta) if self.compress_repeats else zeta

    def _set_hypothesis(self, hyp: FiniteRewardAutomaton) -> None:
        if hyp != self.hypothesis:
            # state spaces differ between hypotheses, so q_h starts over
            self.q_h = QTable(self.n_actions)
            self.hypothesis = hyp
            log.debug("step %d: hypothesis with %d states", self.steps, hyp.n_states)

    def bootstrap(self):
        """Explore under the all-zero hypothesis until some reward shows up."""
        trivial = constant_fra(self.env.labels, 0)
        self._set_hypothesis(trivial)
        episodes = 0
        while not self.exhausted:
            if self.bootstrap_cap is not None and episodes >= self.bootstrap_cap:
                raise BootstrapError(
                    f"no reward seen in {episodes} episodes of length {self.hp.eplength}; "
                    "try a larger eplength or bootstrap cap"
                )
            trace = self._episode(QueryKind.EQUIVALENCE, trivial, self.q_h, BOOTSTRAP)
            episodes += 1
            self.store.add(trace)
            cex = find_counterexample(trace, trivial)
            if cex is not None:
                return cex
        return None

    def _fresh_q_m(self, zeta) -> QTable:
        """New q_m for ``zeta``, copied from the cached table whose trace shares
        the longest label prefix with it (fresh if none shares any)."""
        q = QTable(self.n_actions)
        if not self.warm_start_q_m:
            return q
        best, best_len = None, 0
        for other, table in self.q_m_store.items():
            n = 0
            for (l1, _), (l2, _) in zip(zeta, other):
                if l1 != l2:
                    break
                n += 1
            if n >= best_len and n > 0:
                best, best_len = table, n
        if best is not None:
            q.values = {k: list(v) for k, v in best.values.items()}
        return q

    def mquery(self, chi) -> bool:
        """Answer the words in ``chi``; True if a defaulted negative was flipped.

        With repeat compression a word is answered through its normal form,
        since a zero-reward repeat of the previous label never shows up in
        a compressed trace.
        """
        table, store = self.table, self.store
        for zeta in chi:
            if zeta in table.T:
                continue
            key = self._normal_form(zeta)
            if key != zeta:
                self._aliases.setdefault(key, []).append(zeta)
                if key in table.T:
                    self._answer(zeta, table.T[key])
                    continue
            prev = store.check(key)
            if prev is not None:
                self._answer(key, prev)
                continue
            if self.compress_repeats and has_rewarded_repeat(key):
                # repeats are assumed to pay nothing; revisable via nsample
                self._answer(key, 0)
                store.add_negative(key)
                continue
            q = self.q_m_store.get(key)
            if q is None:
                q = self.q_m_store[key] = self._fresh_q_m(key)
            query_fra = build_query_fra(key, self.env.labels)
            counter = 0
            inconsistent = False
            while store.check(key) is None and counter < self.budget_c and not inconsistent:
                if self.exhausted:
                    return False
                trace = self._episode(QueryKind.MEMBERSHIP, query_fra, q, MEMBERSHIP)
                if traces_inconsistent(key, trace):
                    inconsistent = True
                    if not self.keep_inconsistent:
                        continue
                store.add(trace)
                if self._check_nsample(trace):
                    return True
                if not inconsistent:
                    counter += 1
            answer = store.check(key)
            if answer is None:
                self._answer(key, 0)
                store.add_negative(key)
            else:
                self._answer(key, answer)
        return False

    def repair_table(self) -> bool:
        """Query until the table is complete, closed and consistent; False if out of budget."""
        table = self.table
        while not self.exhausted:
            unknown = table.unknown_words()
            if unknown:
                self.mquery(unknown)
                continue
            if table.is_consistent() and table.is_closed():
                return True
            self.mquery(check_obs_table(table))
        return False

    def equery(self):
        """Exploit the hypothesis until a trace contradicts it (or the budget ends)."""
        hyp = self.hypothesis
        while not self.exhausted:
            trace = self._episode(QueryKind.EQUIVALENCE, hyp, self.q_h, EQUIVALENCE)
            self.store.add(trace)
            self._check_nsample(trace)
            cex = find_counterexample(trace, hyp)
            if cex is not None:
                return cex
        return None

    def run(self) -> AfraiResult:
        cex = self.bootstrap()
        while cex is not None and not self.exhausted:
            self.counterexamples.append(cex)
            log.debug("step %d: counterexample %s", self.steps, cex)
            self.table.add_counterexample(cex)
            if not self.repair_table():
                break
            self._set_hypothesis(hypothesis_fra(self.table, self.env.labels))
            cex = self.equery()
        return AfraiResult(
            self.hypothesis, self.q_h, self.metrics, self.steps, self.table, self.store,
            self.counterexamples, self.queries_answered,
        )


def afrai_run(env, hp: Hyperparams, budget_c: int, total_steps: int, rng, **options) -> AfraiResult:
    return Afrai(env, hp, budget_c, total_steps, rng, **options).run()
