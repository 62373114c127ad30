"""Active inference of finite reward automata, interleaved with Q-learning."""

from afrai.automata import (
    EMPTY,
    FiniteRewardAutomaton,
    Trace,
    fra_run,
    label,
    mealy_to_dfa,
)
from afrai.environments import make_corridor, make_minecraft_world, make_office_world
from afrai.orchestrator import Afrai, afrai_run
from afrai.rl import Hyperparams

__version__ = "0.1.0"

__all__ = [
    "EMPTY", "Afrai", "FiniteRewardAutomaton", "Hyperparams", "Trace", "afrai_run",
    "fra_run", "label", "make_corridor", "make_minecraft_world", "make_office_world",
    "mealy_to_dfa",
]
