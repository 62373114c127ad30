"""Finite reward automata (Mealy machines with reward outputs) and DFAs.

Labels are frozensets of proposition names. Rewards are kept as
``fractions.Fraction`` so that reward symbols compare and hash exactly;
floats are converted through their decimal representation (``0.1`` becomes
``1/10``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

Label = frozenset
Symbol = tuple  # (Label, Fraction)
Word = tuple  # tuple of Symbol

EMPTY = frozenset()


class UnknownSymbolError(ValueError):
    """A label or (label, reward) symbol outside the automaton's alphabet."""


class InconsistentTracesError(ValueError):
    """Two traces assign different rewards to the same label prefix."""


class FraFormatError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def label(*props: str) -> frozenset:
    return frozenset(props)


def as_reward(value) -> Fraction:
    """Exact reward value; floats go through ``repr`` to keep their decimal form."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a reward")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value))


def label_key(lab: frozenset):
    return (len(lab), sorted(lab))


def sort_labels(labels: Iterable[frozenset]) -> tuple:
    return tuple(sorted(set(labels), key=label_key))


def format_label(lab: frozenset) -> str:
    return "{" + ",".join(sorted(lab)) + "}"


def parse_label(text: str) -> frozenset:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise ValueError(f"label must look like {{a,b}}: {text!r}")
    inner = text[1:-1].strip()
    if not inner:
        return EMPTY
    return frozenset(p.strip() for p in inner.split(","))


def format_reward(r: Fraction) -> str:
    return str(r)


def format_symbol(sym) -> str:
    return f"{format_label(sym[0])}/{format_reward(sym[1])}"


@dataclass(frozen=True)
class Trace:
    """A label sequence paired with the reward sequence it produced."""

    labels: tuple = ()
    rewards: tuple = ()

    def __post_init__(self):
        labels = tuple(frozenset(lab) for lab in self.labels)
        rewards = tuple(as_reward(r) for r in self.rewards)
        if len(labels) != len(rewards):
            raise ValueError(
                f"trace has {len(labels)} labels but {len(rewards)} rewards"
            )
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "rewards", rewards)

    @classmethod
    def from_word(cls, word: Iterable) -> "Trace":
        word = tuple(word)
        return cls(tuple(s[0] for s in word), tuple(s[1] for s in word))

    @cached_property
    def word(self) -> tuple:
        return tuple(zip(self.labels, self.rewards))

    def __len__(self):
        return len(self.labels)

    def prefix(self, k: int) -> "Trace":
        return Trace(self.labels[:k], self.rewards[:k])

    def compressed(self) -> "Trace":
        """Drop steps whose label is empty and whose reward is zero."""
        keep = [i for i, (lab, r) in enumerate(self.word) if lab or r != 0]
        return Trace(
            tuple(self.labels[i] for i in keep), tuple(self.rewards[i] for i in keep)
        )

    def without_repeats(self) -> "Trace":
        """Drop zero-reward steps that repeat the previous step's label."""
        return Trace.from_word(drop_repeats(self.word))

    def __str__(self):
        return " ".join(format_symbol(s) for s in self.word) or "<empty>"


def drop_repeats(word) -> tuple:
    """Remove every ``(label, 0)`` symbol whose label equals the last kept one."""
    out = []
    for lab, r in word:
        if out and r == 0 and out[-1][0] == lab:
            continue
        out.append((lab, r))
    return tuple(out)


def has_rewarded_repeat(word) -> bool:
    """True if two consecutive symbols share a label.

    After :func:`drop_repeats` only repeats that carry a reward are left.
    """
    return any(a[0] == b[0] for a, b in zip(word, word[1:]))


def as_word(x) -> tuple:
    """Accept a Trace or any sequence of (label, reward) pairs."""
    if isinstance(x, Trace):
        return x.word
    return tuple((frozenset(lab), as_reward(r)) for lab, r in x)


@dataclass(frozen=True, eq=False)
class FiniteRewardAutomaton:
    """A Mealy machine ``(W, w_init, labels, rewards, delta, eta)``.

    States are the integers ``0 .. n_states-1``. ``delta`` and ``eta`` map
    ``(state, label)`` to the next state and the emitted reward and must be
    total over ``states x input_alphabet``.
    """

    n_states: int
    initial: int
    input_alphabet: tuple
    reward_alphabet: tuple
    delta: Mapping
    eta: Mapping

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError("an automaton needs at least one state")
        if not 0 <= self.initial < self.n_states:
            raise ValueError(f"initial state {self.initial} out of range")
        inputs = sort_labels(self.input_alphabet)
        rewards = tuple(sorted({as_reward(r) for r in self.reward_alphabet}))
        delta = {(w, frozenset(lab)): nxt for (w, lab), nxt in self.delta.items()}
        eta = {(w, frozenset(lab)): as_reward(r) for (w, lab), r in self.eta.items()}
        for w in range(self.n_states):
            for lab in inputs:
                if (w, lab) not in delta or (w, lab) not in eta:
                    raise ValueError(
                        f"transition missing for state {w} on {format_label(lab)}"
                    )
                if not 0 <= delta[w, lab] < self.n_states:
                    raise ValueError(f"transition target {delta[w, lab]} out of range")
                if eta[w, lab] not in rewards:
                    raise ValueError(f"output {eta[w, lab]} not in reward alphabet")
        object.__setattr__(self, "input_alphabet", inputs)
        object.__setattr__(self, "reward_alphabet", rewards)
        object.__setattr__(self, "delta", MappingProxyType(delta))
        object.__setattr__(self, "eta", MappingProxyType(eta))

    @property
    def states(self) -> range:
        return range(self.n_states)

    def __len__(self):
        return self.n_states

    def __eq__(self, other):
        if not isinstance(other, FiniteRewardAutomaton):
            return NotImplemented
        return (
            self.n_states == other.n_states
            and self.initial == other.initial
            and self.input_alphabet == other.input_alphabet
            and self.reward_alphabet == other.reward_alphabet
            and dict(self.delta) == dict(other.delta)
            and dict(self.eta) == dict(other.eta)
        )

    __hash__ = None

    @cached_property
    def table(self) -> tuple:
        """Per-state dict ``label -> (next_state, float reward)`` for hot loops."""
        return tuple(
            {lab: (self.delta[w, lab], float(self.eta[w, lab])) for lab in self.input_alphabet}
            for w in self.states
        )

    def step(self, state: int, lab: frozenset):
        try:
            return self.delta[state, lab], self.eta[state, lab]
        except KeyError:
            raise UnknownSymbolError(f"label {format_label(lab)} not in input alphabet") from None

    def run(self, labels: Iterable) -> list:
        return fra_run(self, labels)


def fra_run(fra: FiniteRewardAutomaton, labels: Iterable) -> list:
    """Reward sequence the automaton emits while reading ``labels``."""
    w = fra.initial
    out = []
    for lab in labels:
        w, r = fra.step(w, frozenset(lab))
        out.append(r)
    return out


def constant_fra(input_alphabet: Iterable, reward=0) -> FiniteRewardAutomaton:
    """One state, every label self-loops with the same reward."""
    inputs = sort_labels(input_alphabet)
    r = as_reward(reward)
    return FiniteRewardAutomaton(
        1, 0, inputs, (Fraction(0), Fraction(1), r),
        {(0, lab): 0 for lab in inputs}, {(0, lab): r for lab in inputs},
    )


@dataclass(frozen=True, eq=False)
class Dfa:
    n_states: int
    initial: int
    alphabet: tuple
    delta: Mapping
    accepting: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        object.__setattr__(self, "delta", MappingProxyType(dict(self.delta)))
        if not 0 <= self.initial < self.n_states:
            raise ValueError("initial state out of range")
        if not self.accepting <= set(range(self.n_states)):
            raise ValueError("accepting states out of range")
        for v in range(self.n_states):
            for sym in self.alphabet:
                if (v, sym) not in self.delta:
                    raise ValueError(f"transition missing for state {v} on {sym!r}")

    @property
    def states(self) -> range:
        return range(self.n_states)

    def run(self, word: Iterable) -> int:
        v = self.initial
        for sym in word:
            try:
                v = self.delta[v, sym]
            except KeyError:
                raise UnknownSymbolError(f"symbol {sym!r} not in DFA alphabet") from None
        return v

    def accepts(self, word: Iterable) -> bool:
        return self.run(word) in self.accepting


def dfa_run_accepts(dfa: Dfa, word: Iterable) -> bool:
    return dfa.accepts(as_word(word))


def mealy_to_dfa(fra: FiniteRewardAutomaton, rewards: Iterable | None = None) -> Dfa:
    """DFA over label x reward accepting exactly the input/output pairs of ``fra``.

    The extra state ``fra.n_states`` is a rejecting, absorbing sink.
    ``rewards`` widens the reward half of the alphabet, e.g. to compare two
    automata over a common alphabet.
    """
    sink = fra.n_states
    reward_alphabet = fra.reward_alphabet
    if rewards is not None:
        reward_alphabet = tuple(sorted(set(reward_alphabet) | {as_reward(r) for r in rewards}))
    alphabet = tuple(itertools.product(fra.input_alphabet, reward_alphabet))
    delta = {}
    for v in range(sink + 1):
        for sym in alphabet:
            lab, r = sym
            if v != sink and fra.eta[v, lab] == r:
                delta[v, sym] = fra.delta[v, lab]
            else:
                delta[v, sym] = sink
    return Dfa(sink + 1, fra.initial, alphabet, delta, frozenset(range(sink)))


def build_query_fra(zeta, input_alphabet: Iterable = ()) -> FiniteRewardAutomaton:
    """Automaton paying 1 each time the next label of ``zeta`` is produced.

    State ``i`` waits for label ``i+1`` of the trace; any other label
    self-loops with reward 0. The last state absorbs with reward 0.
    """
    word = as_word(zeta)
    targets = [s[0] for s in word]
    inputs = sort_labels(list(input_alphabet) + targets + [EMPTY])
    k = len(targets)
    delta, eta = {}, {}
    for i in range(k + 1):
        for lab in inputs:
            if i < k and lab == targets[i]:
                delta[i, lab], eta[i, lab] = i + 1, 1
            else:
                delta[i, lab], eta[i, lab] = i, 0
    return FiniteRewardAutomaton(k + 1, 0, inputs, (0, 1), delta, eta)


def build_prefix_tree_fra(traces: Iterable, input_alphabet: Iterable = ()) -> FiniteRewardAutomaton:
    """Tree-shaped automaton reproducing every given trace.

    One state per distinct label prefix; labels never seen at a node
    self-loop with reward 0.
    """
    traces = [t if isinstance(t, Trace) else Trace.from_word(as_word(t)) for t in traces]
    children: list[dict] = [{}]
    owner: dict = {}  # (node, label) -> trace that fixed the reward
    inputs = set(input_alphabet) | {EMPTY}
    rewards = {Fraction(0)}
    for tr in traces:
        node = 0
        for lab, r in tr.word:
            inputs.add(lab)
            rewards.add(r)
            if lab in children[node]:
                nxt, seen = children[node][lab]
                if seen != r:
                    raise InconsistentTracesError(
                        f"traces [{owner[node, lab]}] and [{tr}] disagree on the reward "
                        f"after the same labels"
                    )
                node = nxt
            else:
                children.append({})
                children[node][lab] = (len(children) - 1, r)
                owner[node, lab] = tr
                node = len(children) - 1
    inputs = sort_labels(inputs)
    delta, eta = {}, {}
    for node, kids in enumerate(children):
        for lab in inputs:
            nxt, r = kids.get(lab, (node, Fraction(0)))
            delta[node, lab], eta[node, lab] = nxt, r
    return FiniteRewardAutomaton(len(children), 0, inputs, tuple(rewards), delta, eta)


def quantize_rewards(r_min, r_max, epsilon) -> tuple:
    """The grid ``r_min + n*epsilon`` for every ``n`` keeping the value <= ``r_max``."""
    lo, hi, eps = as_reward(r_min), as_reward(r_max), as_reward(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if lo > hi:
        raise ValueError("r_min must not exceed r_max")
    n_max = (hi - lo) // eps
    return tuple(lo + n * eps for n in range(int(n_max) + 1))


def nearest_reward(values: Sequence, r) -> Fraction:
    """Closest grid value to ``r``; ties go to the smaller value."""
    if not values:
        raise ValueError("empty reward set")
    x = as_reward(r)
    return min(values, key=lambda v: (abs(v - x), v))


def fra_to_dot(fra: FiniteRewardAutomaton, name: str = "fra") -> str:
    lines = [f"digraph {name} {{", "  rankdir=LR;", '  __start [shape=point, label=""];']
    for w in fra.states:
        lines.append(f'  w{w} [shape=circle, label="w{w}"];')
    lines.append(f"  __start -> w{fra.initial};")
    for w in fra.states:
        for lab in fra.input_alphabet:
            text = f"{format_label(lab)}/{format_reward(fra.eta[w, lab])}"
            lines.append(f'  w{w} -> w{fra.delta[w, lab]} [label="{text}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def dumps_fra(fra: FiniteRewardAutomaton) -> str:
    """Line-oriented text form; transitions listed by state, then label order."""
    out = [
        "# finite reward automaton",
        f"states {fra.n_states}",
        f"initial {fra.initial}",
        "inputs " + " ".join(format_label(lab) for lab in fra.input_alphabet),
        "rewards " + " ".join(format_reward(r) for r in fra.reward_alphabet),
    ]
    for w in fra.states:
        for lab in fra.input_alphabet:
            out.append(
                f"{w} {format_label(lab)} {fra.delta[w, lab]} {format_reward(fra.eta[w, lab])}"
            )
    return "\n".join(out) + "\n"


def loads_fra(text: str) -> FiniteRewardAutomaton:
    header: dict = {}
    delta, eta = {}, {}
    last = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last = lineno
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        try:
            if key in ("states", "initial"):
                header[key] = int(rest)
            elif key == "inputs":
                header[key] = [parse_label(t) for t in rest.split()]
            elif key == "rewards":
                header[key] = [Fraction(t) for t in rest.split()]
            else:
                parts = line.split()
                if len(parts) != 4:
                    raise ValueError("expected 'state label next reward'")
                w, lab = int(parts[0]), parse_label(parts[1])
                if (w, lab) in delta:
                    raise ValueError(f"duplicate transition for state {w}")
                delta[w, lab] = int(parts[2])
                eta[w, lab] = Fraction(parts[3])
        except ValueError as exc:
            raise FraFormatError(lineno, str(exc)) from None
    for key in ("states", "initial", "inputs", "rewards"):
        if key not in header:
            raise FraFormatError(last, f"missing '{key}' line")
    try:
        return FiniteRewardAutomaton(
            header["states"], header["initial"], header["inputs"], header["rewards"], delta, eta
        )
    except ValueError as exc:
        raise FraFormatError(last, str(exc)) from None
