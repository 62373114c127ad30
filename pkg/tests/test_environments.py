import json
import random
from collections import Counter

import pytest

from afrai.automata import EMPTY, fra_run, label
from afrai.environments import (
    EAST,
    NORTH,
    WEST,
    GridConfigError,
    GridSpec,
    GridWorld,
    grid_config_document,
    load_asset,
    load_grid_config,
    make_corridor,
    make_minecraft_world,
    make_office_world,
    sequence_task,
)

a, b, c, e, f = (label(p) for p in "abcef")


def total(fra, labels):
    return sum(fra_run(fra, labels))


class TestTasks:
    def test_office_task1(self):
        task = make_office_world(1).task
        assert total(task, [a, b, a, c]) == 1
        assert total(task, [b, a, c]) == 0

    def test_office_task2_cycles(self):
        assert total(make_office_world(2).task, [b, c, a, b, c, a]) == 2

    def test_office_task3(self):
        task = make_office_world(3).task
        assert fra_run(task, [c, b, a, b, c, a])[-1] == 1

    def test_craft_task1(self):
        task = make_minecraft_world(1).task
        assert fra_run(task, [b, e, f, e, c]) == [0, 0, 0, 0, 1]
        assert total(task, [b, e, f, c]) == 0

    def test_craft_task2(self):
        assert fra_run(make_minecraft_world(2).task, [b, e, a, b, c])[-1] == 1

    def test_distractors_ignored(self):
        task = make_office_world(1).task
        assert total(task, [a, EMPTY, c, b, EMPTY, a, c]) == 1

    @pytest.mark.parametrize("maker,bad", [(make_office_world, 4), (make_minecraft_world, 3)])
    def test_invalid_id(self, maker, bad):
        with pytest.raises(ValueError):
            maker(bad)

    def test_acyclic_pays_once(self):
        task = sequence_task(("a",), {a})
        assert fra_run(task, [a, a, a]) == [1, 0, 0]


class TestDynamics:
    def test_deterministic_move(self):
        spec = GridSpec(3, 3, (1, 1), 0.0)
        env = GridWorld(spec, sequence_task(("a",), set()))
        env.reset()
        out = env.step(NORTH, random.Random(0))
        assert env.cells[out.next_state.cell] == (0, 1)

    def test_boundary(self):
        env = make_corridor()
        env.reset()
        out = env.step(WEST, random.Random(0))
        assert out.next_state.cell == 0 and out.label == EMPTY and out.reward == 0

    def test_wall_blocks(self):
        spec = load_grid_config({"width": 2, "height": 1, "initial": [0, 0], "slip": 0,
                                 "walls": [[[0, 0], [0, 1]]]})
        env = GridWorld(spec, sequence_task(("a",), set()))
        assert env.transition_model(0, EAST) == [(0, 1.0)]

    def test_slip_frequencies(self):
        spec = GridSpec(3, 3, (1, 1), 0.05)
        env = GridWorld(spec, sequence_task(("a",), set()))
        rng = random.Random(42)
        counts = Counter()
        for _ in range(100_000):
            env.reset()
            counts[env.cells[env.step(NORTH, rng).next_state.cell]] += 1
        assert abs(counts[(0, 1)] / 1e5 - 0.9) < 0.01
        assert abs(counts[(1, 2)] / 1e5 - 0.05) < 0.01
        assert abs(counts[(1, 0)] / 1e5 - 0.05) < 0.01

    @pytest.mark.parametrize("maker", [lambda: make_office_world(1), lambda: make_minecraft_world(1)])
    def test_rows_sum_to_one(self, maker):
        env = maker()
        for x in range(env.n_states):
            for act in env.actions:
                dist = env.transition_model(x, act)
                assert abs(sum(p for _, p in dist) - 1) < 1e-9
                assert all(p > 0 for _, p in dist)

    def test_rewards_follow_task(self):
        env = make_office_world(1)
        rng = random.Random(3)
        env.reset()
        labels, rewards = [], []
        for _ in range(5000):
            out = env.step(rng.randrange(4), rng)
            labels.append(out.label)
            rewards.append(out.reward)
        assert rewards == fra_run(env.task, labels)

    def test_seeded_reproducible(self):
        def run(seed):
            env = make_minecraft_world(1)
            rng = random.Random(seed)
            env.reset()
            return [env.step(rng.randrange(4), rng) for _ in range(500)]
        assert run(7) == run(7)


class TestConfig:
    def test_office_asset(self):
        spec = load_asset("office_default")
        assert (spec.height, spec.width) == (9, 12)
        assert spec.propositions == ("a", "b", "c")
        assert spec.slip == 0.05

    def test_craft_asset(self):
        spec = load_asset("craft_default")
        assert (spec.height, spec.width) == (21, 21)
        assert set(spec.propositions) == set("abcef")

    def test_empty_walls(self):
        spec = load_grid_config({"width": 3, "height": 3, "initial": [0, 0], "walls": []})
        assert spec.walls == frozenset()

    @pytest.mark.parametrize("doc,fieldname", [
        ({"width": 12, "height": 9, "initial": [0, 0], "landmarks": [{"cell": [99, 0], "prop": "a"}]},
         "landmarks[0].cell"),
        ({"width": 3, "height": 3, "initial": [0, 0], "walls": [[[0, 0], [2, 2]]]}, "walls[0]"),
        ({"width": 3, "height": 3, "initial": [0, 0], "walls": [[0, 0]]}, "walls[0]"),
        ({"width": 3, "height": 3, "initial": [0, 0], "slip": 0.5}, "slip"),
        ({"width": 0, "height": 3, "initial": [0, 0]}, "width"),
        ({"width": 3, "height": 3, "initial": [5, 0]}, "initial"),
    ])
    def test_validation(self, doc, fieldname):
        with pytest.raises(GridConfigError) as exc:
            load_grid_config(doc)
        assert exc.value.field == fieldname

    def test_document_round_trip(self, tmp_path):
        spec = load_asset("office_default")
        path = tmp_path / "map.json"
        path.write_text(json.dumps(grid_config_document(spec)))
        assert load_grid_config(str(path)) == spec

    def test_task_must_read_every_label(self):
        doc = {"width": 2, "height": 1, "initial": [0, 0], "slip": 0,
               "landmarks": [{"cell": [0, 1], "prop": "a"}, {"cell": [0, 0], "prop": "b"},
                             ]}
        with pytest.raises(ValueError, match="does not read"):
            GridWorld(load_grid_config(doc), sequence_task(("a",), {a}))
