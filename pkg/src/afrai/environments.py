"""Slippery grid worlds with landmark labels and a hidden task automaton.

The agent observes only its cell index. Rewards come from a task automaton
that the environment runs on the emitted labels; the agent never sees its
state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, NamedTuple

from afrai.automata import EMPTY, FiniteRewardAutomaton, sort_labels

NORTH, SOUTH, EAST, WEST = 0, 1, 2, 3
ACTION_NAMES = ("N", "S", "E", "W")
_MOVES = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1)}
_LATERAL = {NORTH: (EAST, WEST), SOUTH: (EAST, WEST), EAST: (NORTH, SOUTH), WEST: (NORTH, SOUTH)}

OFFICE_TASKS = {
    1: (("a", "b", "a", "c"), False),
    2: (("b", "c", "a"), True),
    3: (("c", "b", "a", "b", "c", "a"), False),
}
CRAFT_TASKS = {
    1: (("b", "e", "f", "e", "c"), False),  # hammer
    2: (("b", "e", "a", "b", "c"), False),  # spear
}


class GridConfigError(ValueError):
    def __init__(self, fieldname: str, msg: str):
        super().__init__(f"{fieldname}: {msg}")
        self.field = fieldname


@dataclass(frozen=True)
class GridSpec:
    height: int
    width: int
    initial: tuple
    slip: float = 0.05
    landmarks: Mapping = field(default_factory=dict)  # (row, col) -> proposition
    walls: frozenset = frozenset()  # frozenset({cellA, cellB}) per blocked edge

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    @property
    def propositions(self) -> tuple:
        return tuple(sorted(set(self.landmarks.values())))


class EnvState(NamedTuple):
    cell: int
    task_state: int


class StepOutcome(NamedTuple):
    next_state: EnvState
    label: frozenset
    reward: object  # Fraction


def _cell(value, fieldname):
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise GridConfigError(fieldname, f"expected [row, col], got {value!r}")
    return (value[0], value[1])


def load_grid_config(document) -> GridSpec:
    """Validate a grid document (dict, JSON text, or path to a JSON file)."""
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        document = Path(document).read_text()
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise GridConfigError("document", f"invalid JSON ({exc})") from None
    if not isinstance(document, dict):
        raise GridConfigError("document", "expected an object")
    for key in ("width", "height"):
        v = document.get(key)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise GridConfigError(key, f"must be a positive integer, got {v!r}")
    height, width = document["height"], document["width"]

    def check_bounds(cell, fieldname):
        if not (0 <= cell[0] < height and 0 <= cell[1] < width):
            raise GridConfigError(fieldname, f"cell {list(cell)} outside {height}x{width} grid")
        return cell

    initial = check_bounds(_cell(document.get("initial"), "initial"), "initial")
    slip = document.get("slip", 0.05)
    if not isinstance(slip, (int, float)) or isinstance(slip, bool) or not 0 <= slip < 0.5:
        raise GridConfigError("slip", f"must lie in [0, 0.5), got {slip!r}")
    landmarks = {}
    for i, item in enumerate(document.get("landmarks", [])):
        name = f"landmarks[{i}]"
        if not isinstance(item, dict):
            raise GridConfigError(name, "expected {cell, prop}")
        cell = check_bounds(_cell(item.get("cell"), name + ".cell"), name + ".cell")
        prop = item.get("prop")
        if not isinstance(prop, str) or not prop.isidentifier():
            raise GridConfigError(name + ".prop", f"bad proposition {prop!r}")
        if cell in landmarks:
            raise GridConfigError(name, f"cell {list(cell)} already labeled")
        landmarks[cell] = prop
    walls = set()
    for i, item in enumerate(document.get("walls", [])):
        name = f"walls[{i}]"
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise GridConfigError(name, "expected [cellA, cellB]")
        a = check_bounds(_cell(item[0], name), name)
        b = check_bounds(_cell(item[1], name), name)
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
            raise GridConfigError(name, f"cells {list(a)} and {list(b)} are not adjacent")
        walls.add(frozenset((a, b)))
    return GridSpec(height, width, initial, float(slip), landmarks, frozenset(walls))


def grid_config_document(spec: GridSpec) -> dict:
    return {
        "width": spec.width,
        "height": spec.height,
        "initial": list(spec.initial),
        "slip": spec.slip,
        "landmarks": [{"cell": list(c), "prop": p} for c, p in sorted(spec.landmarks.items())],
        "walls": sorted([sorted(list(c) for c in w) for w in spec.walls]),
    }


def load_asset(name: str) -> GridSpec:
    text = resources.files("afrai.assets").joinpath(f"{name}.json").read_text()
    return load_grid_config(text)


def sequence_task(props, labels, cyclic: bool = False) -> FiniteRewardAutomaton:
    """Visit ``props`` in order; reward 1 on completing the sequence.

    Acyclic tasks then absorb with reward 0; cyclic tasks restart and pay
    again on every completed round. Other labels self-loop with reward 0.
    """
    k = len(props)
    n = k if cyclic else k + 1
    inputs = sort_labels(set(labels) | {EMPTY})
    delta, eta = {}, {}
    for w in range(n):
        for lab in inputs:
            delta[w, lab], eta[w, lab] = w, 0
            if w < k and lab == frozenset({props[w]}):
                last = w == k - 1
                delta[w, lab] = 0 if (cyclic and last) else w + 1
                eta[w, lab] = 1 if last else 0
    return FiniteRewardAutomaton(n, 0, inputs, (0, 1), delta, eta)


class GridWorld:
    """Labeled MDP on a grid; the cell index is the observable state."""

    actions = (NORTH, SOUTH, EAST, WEST)

    def __init__(self, spec: GridSpec, task: FiniteRewardAutomaton, name: str = "grid"):
        self.spec = spec
        self.task = task
        self.name = name
        self.cells = [(r, c) for r in range(spec.height) for c in range(spec.width)]
        self.index = {cell: i for i, cell in enumerate(self.cells)}
        self.labels = sort_labels({EMPTY} | {frozenset({p}) for p in spec.landmarks.values()})
        missing = set(self.labels) - set(task.input_alphabet)
        if missing:
            raise ValueError(f"task automaton does not read labels {sorted(map(sorted, missing))}")
        self.cell_label = [frozenset({spec.landmarks[c]}) if c in spec.landmarks else EMPTY
                           for c in self.cells]
        # (intended, lateral, lateral) destinations after wall blocking
        self._dest = [[self._outcomes(i, a) for a in self.actions] for i in range(len(self.cells))]
        p_slip = spec.slip
        self._p_intended = 1.0 - 2.0 * p_slip
        self._p_left = 1.0 - p_slip
        self._task_step = {
            (w, lab): (task.delta[w, lab], task.eta[w, lab])
            for w in task.states for lab in self.labels
        }
        self.initial_cell = self.index[spec.initial]
        self.state = EnvState(self.initial_cell, task.initial)

    def _move(self, i: int, action: int) -> int:
        r, c = self.cells[i]
        dr, dc = _MOVES[action]
        nxt = (r + dr, c + dc)
        if not self.spec.in_bounds(nxt) or frozenset((self.cells[i], nxt)) in self.spec.walls:
            return i
        return self.index[nxt]

    def _outcomes(self, i: int, action: int) -> tuple:
        left, right = _LATERAL[action]
        return (self._move(i, action), self._move(i, left), self._move(i, right))

    @property
    def n_states(self) -> int:
        return len(self.cells)

    def reset(self) -> int:
        self.state = EnvState(self.initial_cell, self.task.initial)
        return self.initial_cell

    def step(self, action: int, rng) -> StepOutcome:
        cell, w = self.state
        u = rng.random()
        dest = self._dest[cell][action]
        if u < self._p_intended:
            nxt = dest[0]
        elif u < self._p_left:
            nxt = dest[1]
        else:
            nxt = dest[2]
        lab = self.cell_label[nxt]
        w2, r = self._task_step[w, lab]
        self.state = EnvState(nxt, w2)
        return StepOutcome(self.state, lab, r)

    def transition_model(self, cell: int, action: int) -> list:
        """``[(next_cell, probability)]`` with duplicate destinations merged."""
        probs: dict = {}
        slip = self.spec.slip
        for nxt, p in zip(self._dest[cell][action], (1.0 - 2.0 * slip, slip, slip)):
            if p > 0:
                probs[nxt] = probs.get(nxt, 0.0) + p
        return sorted(probs.items())

    def label_of(self, cell: int, action: int, next_cell: int) -> frozenset:
        return self.cell_label[next_cell]

    def __repr__(self):
        return f"GridWorld({self.name!r}, {self.spec.height}x{self.spec.width})"


def _with_override(spec: GridSpec, override) -> GridSpec:
    if override is None:
        return spec
    if isinstance(override, GridSpec):
        return override
    return load_grid_config(override)


def make_office_world(task_id: int, spec_override=None) -> GridWorld:
    if task_id not in OFFICE_TASKS:
        raise ValueError(f"office task must be one of {sorted(OFFICE_TASKS)}, got {task_id!r}")
    spec = _with_override(load_asset("office_default"), spec_override)
    props, cyclic = OFFICE_TASKS[task_id]
    labels = {frozenset({p}) for p in spec.propositions}
    return GridWorld(spec, sequence_task(props, labels, cyclic), f"office-task{task_id}")


def make_minecraft_world(task_id: int, spec_override=None) -> GridWorld:
    if task_id not in CRAFT_TASKS:
        raise ValueError(f"craft task must be one of {sorted(CRAFT_TASKS)}, got {task_id!r}")
    spec = _with_override(load_asset("craft_default"), spec_override)
    props, cyclic = CRAFT_TASKS[task_id]
    labels = {frozenset({p}) for p in spec.propositions}
    return GridWorld(spec, sequence_task(props, labels, cyclic), f"craft-task{task_id}")


def make_corridor(props=("a",), slip: float = 0.0) -> GridWorld:
    """1x2 corridor: start on the left, landmark ``a`` on the right.

    The task pays 1 the first time the props are seen in order.
    """
    spec = GridSpec(1, 2, (0, 0), slip, {(0, 1): "a"})
    return GridWorld(spec, sequence_task(props, {frozenset({"a"})}), "corridor")


def make_small_grid(props=("a", "b"), slip: float = 0.0) -> GridWorld:
    """Deterministic 3x3 room with landmarks ``a`` (top right) and ``b`` (bottom left)."""
    spec = GridSpec(3, 3, (0, 0), slip, {(0, 2): "a", (2, 0): "b"})
    labels = {frozenset({"a"}), frozenset({"b"})}
    return GridWorld(spec, sequence_task(props, labels), "grid3x3")
