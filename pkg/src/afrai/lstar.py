"""L* observation table over the combined label x reward alphabet.

Words are tuples of ``(label, reward)`` symbols. The table answers
``T(word) in {0, 1}``: 1 when the word is a valid input/output prefix of the
target reward automaton. Row signatures are tuples of bits in ``E`` order.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable

from afrai.automata import (
    EMPTY,
    FiniteRewardAutomaton,
    InconsistentTracesError,
    Trace,
    as_reward,
    as_word,
    format_symbol,
    sort_labels,
)


class StaleTableError(RuntimeError):
    """The table has unanswered cells, or is not closed and consistent."""


class ObservationTable:
    def __init__(self, labels: Iterable, rewards: Iterable = (0, 1)):
        self.labels = list(sort_labels(labels))
        self.rewards = sorted({as_reward(r) for r in rewards})
        self.S: list = [()]
        self.E: list = [()]
        self.T: dict = {}
        self._S = {()}
        self._E = {()}

    @property
    def alphabet(self) -> list:
        return [(lab, r) for lab in self.labels for r in self.rewards]

    def extend_alphabet(self, labels: Iterable = (), rewards: Iterable = ()) -> bool:
        new_labels = set(labels) - set(self.labels)
        new_rewards = {as_reward(r) for r in rewards} - set(self.rewards)
        if not new_labels and not new_rewards:
            return False
        self.labels = list(sort_labels(set(self.labels) | new_labels))
        self.rewards = sorted(set(self.rewards) | new_rewards)
        return True

    def extensions(self) -> list:
        """``S . Sigma`` in deterministic order."""
        alphabet = self.alphabet
        return [s + (sym,) for s in self.S for sym in alphabet]

    def all_rows(self) -> list:
        rows = list(self.S)
        rows.extend(t for t in self.extensions() if t not in self._S)
        return rows

    def unknown_words(self) -> list:
        needed = dict.fromkeys(s + e for s in self.all_rows() for e in self.E)
        return [w for w in needed if w not in self.T]

    def answer(self, word, bit: int) -> None:
        self.T[tuple(word)] = int(bit)

    def row(self, s) -> tuple:
        try:
            return tuple(self.T[s + e] for e in self.E)
        except KeyError:
            raise StaleTableError(f"row {_fmt(s)} has unanswered cells") from None

    def add_prefix(self, s) -> bool:
        s = tuple(s)
        if s in self._S:
            return False
        # keep S prefix-closed
        for k in range(len(s) + 1):
            if s[:k] not in self._S:
                self._S.add(s[:k])
                self.S.append(s[:k])
        return True

    def add_suffix(self, e) -> bool:
        e = tuple(e)
        if e in self._E:
            return False
        self._E.add(e)
        self.E.append(e)
        return True

    def add_counterexample(self, trace) -> "ObservationTable":
        word = as_word(trace)
        self.extend_alphabet((s[0] for s in word), (s[1] for s in word))
        self.add_prefix(word)
        return self

    def closedness_violation(self):
        upper = {self.row(s) for s in self.S}
        for t in self.extensions():
            if self.row(t) not in upper:
                return t
        return None

    def consistency_violation(self):
        by_row: dict = {}
        for s in self.S:
            by_row.setdefault(self.row(s), []).append(s)
        alphabet = self.alphabet
        for group in by_row.values():
            for s1, s2 in itertools.combinations(group, 2):
                for sym in alphabet:
                    for e in self.E:
                        a, b = s1 + (sym,) + e, s2 + (sym,) + e
                        if a not in self.T or b not in self.T:
                            raise StaleTableError("unanswered cell in consistency check")
                        if self.T[a] != self.T[b]:
                            return s1, s2, sym, e
        return None

    def is_closed(self) -> bool:
        return self.closedness_violation() is None

    def is_consistent(self) -> bool:
        return self.consistency_violation() is None

    def dump(self) -> str:
        """Tab-separated view: rows S then S.Sigma, columns E, cells 0/1/?."""
        lines = ["\t".join(["row"] + [_fmt(e) for e in self.E])]
        for s in self.all_rows():
            cells = [str(self.T.get(s + e, "?")) for e in self.E]
            marker = "" if s in self._S else "*"
            lines.append("\t".join([marker + _fmt(s)] + cells))
        return "\n".join(lines) + "\n"


def _fmt(word) -> str:
    return " ".join(format_symbol(s) for s in word) or "ε"


def init_table(labels: Iterable, rewards: Iterable = (0, 1)) -> ObservationTable:
    return ObservationTable(labels, rewards)


def is_closed(table: ObservationTable) -> bool:
    return table.is_closed()


def is_consistent(table: ObservationTable) -> bool:
    return table.is_consistent()


def check_obs_table(table: ObservationTable) -> list:
    """Repair one consistency or closedness defect; return the words to query.

    Inconsistency is handled first: a separating suffix ``sigma e`` joins E
    and the queries are ``(S u S.Sigma) sigma e``. Otherwise an unmatched
    row ``s sigma`` joins S and the queries are ``(s sigma u s sigma Sigma) E``.
    """
    bad = table.consistency_violation()
    if bad is not None:
        _, _, sym, e = bad
        suffix = (sym,) + e
        table.add_suffix(suffix)
        return list(dict.fromkeys(s + suffix for s in table.all_rows()))
    t = table.closedness_violation()
    if t is not None:
        table.add_prefix(t)
        heads = [t] + [t + (sym,) for sym in table.alphabet]
        return list(dict.fromkeys(h + e for h in heads for e in table.E))
    return []


def hypothesis_fra(table: ObservationTable, input_alphabet: Iterable = ()) -> FiniteRewardAutomaton:
    """Reward automaton read off a closed, consistent table.

    States are the distinct rows of accepting ``S`` words. From a state and a
    label, the move uses the smallest reward ``r`` whose extension is
    accepting; with no such reward the label self-loops with reward 0.
    Labels outside the table alphabet (``input_alphabet`` extras) self-loop
    with reward 0.
    """
    if table.unknown_words():
        raise StaleTableError("table has unanswered cells")
    if not table.is_consistent() or not table.is_closed():
        raise StaleTableError("table must be closed and consistent")
    if table.T[()] != 1:
        raise StaleTableError("the empty word must be accepted")
    states: dict = {}
    rep: list = []
    for s in table.S:
        if table.T[s] != 1:
            continue
        sig = table.row(s)
        if sig not in states:
            states[sig] = len(states)
            rep.append(s)
    inputs = sort_labels(set(input_alphabet) | set(table.labels) | {EMPTY})
    zero = Fraction(0)
    delta, eta = {}, {}
    for w, s in enumerate(rep):
        for lab in inputs:
            delta[w, lab], eta[w, lab] = w, zero
            if lab not in table.labels:
                continue
            for r in table.rewards:
                ext = s + ((lab, r),)
                if table.T[ext] == 1:
                    delta[w, lab], eta[w, lab] = states[table.row(ext)], r
                    break
    rewards = set(table.rewards) | {zero}
    return FiniteRewardAutomaton(len(rep), states[table.row(())], inputs, rewards, delta, eta)


def is_prefix(zeta, tau) -> bool:
    z, t = as_word(zeta), as_word(tau)
    return len(z) <= len(t) and t[: len(z)] == z


def traces_inconsistent(zeta, tau) -> bool:
    """Same labels up to some step, but a different reward at that step."""
    for (l1, r1), (l2, r2) in zip(as_word(zeta), as_word(tau)):
        if l1 != l2:
            return False
        if r1 != r2:
            return True
    return False


def check_sample(zeta, sample: Iterable):
    """1 if ``zeta`` prefixes a sample trace, 0 if it contradicts one, else None."""
    for tau in sample:
        if is_prefix(zeta, tau):
            return 1
        if traces_inconsistent(zeta, tau):
            return 0
    return None


class SampleStore:
    """Observed environment traces (``sample``) and defaulted negatives (``nsample``).

    Sample traces are also indexed in a label trie so lookups cost
    ``O(len(zeta))``; because environment rewards are a function of the label
    history, the trie answers exactly as a linear scan would.
    """

    def __init__(self):
        self.sample: list = []
        self.nsample: list = []
        self._seen: set = set()
        self._trie: dict = {}

    def add(self, trace) -> bool:
        trace = trace if isinstance(trace, Trace) else Trace.from_word(as_word(trace))
        word = trace.word
        if word in self._seen:
            return False
        node = self._trie
        path = []
        for i, (lab, r) in enumerate(word):
            entry = node.get(lab)
            if entry is None:
                path.append((node, lab, r))
                entry = node[lab] = [r, {}]
            elif entry[0] != r:
                if path:  # drop the branch this trace created
                    parent, first, _ = path[0]
                    del parent[first]
                raise InconsistentTracesError(
                    f"trace [{trace}] disagrees with an earlier sample trace at step {i + 1}"
                )
            node = entry[1]
        self._seen.add(word)
        self.sample.append(trace)
        return True

    def __contains__(self, trace) -> bool:
        return as_word(trace) in self._seen

    def __len__(self):
        return len(self.sample)

    def check(self, zeta):
        if not self.sample:
            return None
        node = self._trie
        for lab, r in as_word(zeta):
            entry = node.get(lab)
            if entry is None:
                return None
            if entry[0] != r:
                return 0
            node = entry[1]
        return 1

    def add_negative(self, zeta) -> None:
        word = as_word(zeta)
        if word not in self.nsample:
            self.nsample.append(word)


def check_nsample(trace, store: SampleStore, table: ObservationTable) -> bool:
    """Flip defaulted negatives that turn out to prefix ``trace``; True if any flipped."""
    changed = False
    for zeta in list(store.nsample):
        if is_prefix(zeta, trace):
            table.T[zeta] = 1
            store.nsample.remove(zeta)
            changed = True
    return changed
