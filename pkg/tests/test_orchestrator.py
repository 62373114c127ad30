import random
from fractions import Fraction

import pytest

from afrai.automata import EMPTY, Trace, build_prefix_tree_fra, constant_fra, fra_run, label
from afrai.environments import GridSpec, GridWorld, make_corridor, make_small_grid, sequence_task
from afrai.oracle import enumerate_attainable_traces
from afrai.orchestrator import Afrai, BootstrapError, afrai_run, find_counterexample
from afrai.rl import Hyperparams, QTable, episode_length_bound

A, B = label("a"), label("b")


def word(*pairs):
    return tuple((lab, Fraction(r)) for lab, r in pairs)


class TestFindCounterexample:
    def test_agreeing(self):
        env = make_corridor()
        assert find_counterexample(Trace((A, A), (1, 0)), env.task) is None

    def test_zero_hypothesis(self):
        hyp = constant_fra((EMPTY, A, B))
        cex = find_counterexample(Trace((A, B), (0, 1)), hyp)
        assert cex == Trace((A, B), (0, 1))

    def test_minimal(self):
        hyp = constant_fra((EMPTY, A, B))
        rng = random.Random(0)
        for _ in range(200):
            n = rng.randint(1, 5)
            tr = Trace(tuple(rng.choice((A, B)) for _ in range(n)),
                       tuple(rng.choice((0, 1)) for _ in range(n)))
            cex = find_counterexample(tr, hyp)
            if cex is None:
                assert not any(tr.rewards)
                continue
            assert fra_run(hyp, cex.labels)[-1] != cex.rewards[-1]
            for k in range(len(cex)):
                assert fra_run(hyp, cex.labels[:k]) == list(cex.rewards[:k])


def corridor_afrai(**kw):
    env = make_corridor()
    kw.setdefault("total_steps", 2000)
    return Afrai(env, Hyperparams(eplength=8), kw.pop("budget_c", 50), kw.pop("total_steps"), 0, **kw)


class TestRun:
    def test_corridor_learns_reward_on_a(self):
        res = afrai_run(make_corridor(), Hyperparams(eplength=8), 50, 2000, 0)
        assert fra_run(res.hypothesis, [A]) == [1]

    def test_step_budget_granularity(self):
        res = afrai_run(make_corridor(), Hyperparams(eplength=8), 50, 1003, 1)
        assert 1003 <= res.steps < 1003 + 8
        assert len(res.metrics) == res.steps

    def test_zero_budget(self):
        res = afrai_run(make_corridor(), Hyperparams(eplength=8), 50, 0, 0)
        assert res.steps == 0
        assert res.hypothesis == constant_fra(make_corridor().labels)

    def test_samples_are_ground_truth(self):
        env = make_small_grid()
        res = afrai_run(env, Hyperparams(eplength=30), 30, 20_000, 3)
        for tr in res.store.sample:
            assert list(tr.rewards) == fra_run(env.task, tr.labels)

    def test_counterexamples_contradict_their_hypothesis(self):
        env = make_small_grid()
        afrai = Afrai(env, Hyperparams(eplength=30), 30, 20_000, 3)
        seen = []
        real = afrai.equery

        def spy():
            hyp = afrai.hypothesis
            cex = real()
            if cex is not None:
                seen.append((hyp, cex))
            return cex

        afrai.equery = spy
        afrai.run()
        for hyp, cex in seen:
            assert fra_run(hyp, cex.labels) != list(cex.rewards)

    def test_metrics_phases(self):
        res = afrai_run(make_corridor(), Hyperparams(eplength=8), 50, 2000, 0)
        phases = {row[2] for row in res.metrics.rows()}
        assert phases <= {"bootstrap", "membership", "equivalence"}
        assert "bootstrap" in phases


class TestBootstrap:
    def test_cap(self):
        spec = GridSpec(1, 2, (0, 0), 0.0, {})
        env = GridWorld(spec, sequence_task(("a",), {A}))
        afrai = Afrai(env, Hyperparams(eplength=4), 10, 10_000, 0, bootstrap_cap=5)
        with pytest.raises(BootstrapError, match="eplength"):
            afrai.bootstrap()
        assert afrai.steps == 20

    def test_random_agent_finds_reward(self):
        env = make_corridor()
        for seed in range(20):
            afrai = Afrai(env, Hyperparams(epsilon=1.0, eplength=8), 10, 10_000, seed)
            cex = afrai.bootstrap()
            assert cex is not None and afrai.steps <= 8 * 5
            assert find_counterexample(cex, constant_fra(env.labels)) == cex


class TestMquery:
    def test_cached_answer_needs_no_steps(self):
        afrai = corridor_afrai()
        afrai.store.add(word((A, 1), (A, 0)))
        afrai.mquery([word((A, 1))])
        assert afrai.steps == 0 and afrai.table.T[word((A, 1))] == 1

    def test_impossible_reward_answered_zero(self):
        afrai = corridor_afrai(budget_c=200, compress_repeats=False)
        zeta = word((A, 0))  # the first a always pays 1
        afrai.mquery([zeta])
        assert afrai.table.T[zeta] == 0
        # the contradicting trace is discarded, so the answer is a default
        assert zeta in afrai.store.nsample
        assert 0 < afrai.steps < 200 * 8

    def test_zero_budget(self):
        afrai = corridor_afrai(budget_c=0)
        zeta = word((A, 1))
        afrai.mquery([zeta])
        assert afrai.steps == 0
        assert afrai.table.T[zeta] == 0 and zeta in afrai.store.nsample

    def test_q_m_tables_are_isolated(self):
        afrai = corridor_afrai(budget_c=20, warm_start_q_m=False)
        afrai.mquery([word((A, 1))])
        snapshot = {k: dict(v.values) for k, v in afrai.q_m_store.items()}
        q_h = dict(afrai.q_h.values)
        afrai.mquery([word((A, 1), (EMPTY, 0), (A, 1))])
        for k, values in snapshot.items():
            assert afrai.q_m_store[k].values == values
        assert afrai.q_h.values == q_h

    def test_repeat_answered_through_normal_form(self):
        afrai = corridor_afrai()
        afrai.store.add(word((A, 1)))
        afrai.mquery([word((A, 1), (A, 0))])
        assert afrai.table.T[word((A, 1), (A, 0))] == 1
        assert afrai.steps == 0

    def test_rewarded_repeat_defaults_negative(self):
        afrai = corridor_afrai()
        zeta = word((A, 0), (A, 1))
        afrai.mquery([zeta])
        assert afrai.table.T[zeta] == 0
        assert zeta in afrai.store.nsample and afrai.steps == 0

    def test_flip_reaches_aliases(self):
        afrai = corridor_afrai()
        key, alias = word((B, 1)), word((B, 1), (B, 0))
        afrai._aliases[key] = [alias]
        afrai.table.T[key] = afrai.table.T[alias] = 0
        afrai.store.add_negative(key)
        assert afrai._check_nsample(Trace((B,), (1,)))
        assert afrai.table.T[key] == afrai.table.T[alias] == 1


def test_warm_start_copies_longest_prefix_match():
    afrai = corridor_afrai()
    near, far = QTable(4), QTable(4)
    near.set(0, 0, 1, 5.0)
    far.set(0, 0, 2, 7.0)
    afrai.q_m_store[word((A, 1), (EMPTY, 0))] = near
    afrai.q_m_store[word((A, 1), (A, 0), (EMPTY, 0))] = far
    q = afrai._fresh_q_m(word((A, 1), (A, 0), (A, 1)))
    assert q.values == far.values and q.values is not far.values
    assert afrai._fresh_q_m(word((EMPTY, 0))).values == {}


def test_learns_corridor_in_the_limit():
    env = make_corridor(slip=0.0)
    eplength = episode_length_bound(env.n_states, env.task.n_states)
    attainable = enumerate_attainable_traces(env, env.task, 6)
    truth = build_prefix_tree_fra(attainable)
    for budget in (500, 2000, 8000):
        res = afrai_run(env, Hyperparams(eplength=eplength), 50, budget, 11)
        if all(fra_run(res.hypothesis, tr.labels) == list(tr.rewards) for tr in attainable):
            break
    else:
        pytest.fail("no equivalent hypothesis within the largest budget")
    assert truth.n_states >= res.hypothesis.n_states
