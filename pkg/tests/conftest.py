import itertools
import random

import pytest
from hypothesis import strategies as st

from afrai.automata import EMPTY, FiniteRewardAutomaton, label

A, B, C = label("a"), label("b"), label("c")
LABELS3 = (EMPTY, A, B)


def random_fra(rng: random.Random, n_states: int, labels=LABELS3, rewards=(0, 1)):
    delta = {(w, lab): rng.randrange(n_states) for w in range(n_states) for lab in labels}
    eta = {(w, lab): rng.choice(rewards) for w in range(n_states) for lab in labels}
    return FiniteRewardAutomaton(n_states, 0, labels, rewards, delta, eta)


@st.composite
def fras(draw, max_states=4, labels=LABELS3, rewards=(0, 1)):
    n = draw(st.integers(1, max_states))
    delta = {(w, lab): draw(st.integers(0, n - 1)) for w in range(n) for lab in labels}
    eta = {(w, lab): draw(st.sampled_from(rewards)) for w in range(n) for lab in labels}
    return FiniteRewardAutomaton(n, 0, labels, rewards, delta, eta)


def all_words(alphabet, max_len):
    for k in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=k)


@pytest.fixture
def rng():
    return random.Random(12345)


CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the acceptance summary."""

    def record(number: int, passed, detail: str):
        status = {True: "PASS", False: "FAIL", None: "N/A"}[passed]
        CRITERIA[number] = f"criterion {number}: {status}  {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
