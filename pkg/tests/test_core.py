import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsr.core import (
    GsrRunner,
    LadderState,
    SchedulerConfig,
    max_depth,
    run_gsr,
    select_anchor,
    select_task,
    should_refine,
    simple_regret,
    task_regret,
)
from gsr.engine import EngineConfig
from gsr.envelopes import EnvelopeConfig, ValueEnvelope
from gsr.generators import GenResult
from gsr.gp import SearchBudget
from gsr.tasks import EvalRecord, TaskRegistry, TaskSpec
from gsr.utility import DirectOracle

FAST_ENGINE = EngineConfig(fit_kernel=False, n_init=1, budget=SearchBudget(32, 2, 5))


def make_registry(envelopes, counts=None):
    reg = TaskRegistry()
    for name, (lo, hi) in envelopes.items():
        reg.register(TaskSpec(name, ((0.0, 1.0),)))
        state = reg[name]
        state.envelope = ValueEnvelope(lo, hi)
        state.y = [0.0] * (counts or {}).get(name, 0)
    return reg


def bowl(spec, x, rng):
    f = 1.0 - float(np.sum((np.asarray(x) - spec.objective_params.get("c", 0.5)) ** 2))
    return f, f


class CountingGenerator:
    """Always accepts ``J`` fresh children of the anchor."""

    def __call__(self, anchor_state, m, J, rng, registry, new_id):
        base = anchor_state.spec
        kids = [base.derive(task_id=new_id(j), parent_id=base.task_id, level_m=m,
                            objective_params={"c": float(rng.random())}) for j in range(J)]
        return GenResult(kids, [], J)


@pytest.fixture
def tiny_runner():
    def build(seed=0, T=40, J=3, max_depth=2, generator=True):
        return GsrRunner(
            TaskSpec("task1", ((0.0, 1.0),), {"c": 0.3}), bowl, DirectOracle(lambda s, z: min(max(z, 0), 1)),
            CountingGenerator() if generator else None, SchedulerConfig(T=T, J=J, max_depth=max_depth),
            FAST_ENGINE, EnvelopeConfig(lipschitz=0.05), seed,
        )
    return build


class TestSelectTask:
    def test_argmax_upper(self):
        assert select_task(make_registry({"A": (0.1, 0.8), "B": (0.2, 0.6)})) == "A"

    def test_tie_goes_to_fewer_evaluations(self):
        reg = make_registry({"A": (0.1, 0.7), "B": (0.1, 0.7)}, {"A": 5, "B": 2})
        assert select_task(reg) == "B"

    def test_single_task(self):
        assert select_task(make_registry({"A": (0.0, 1.0)})) == "A"

    def test_empty_registry(self):
        with pytest.raises(ValueError):
            select_task(TaskRegistry())


class TestSelectAnchor:
    def test_width_gate(self):
        # widths 0.05 and 0.4 against a gate of 0.1; B has the better lower bound but fails the gate
        reg = make_registry({"A": (0.3, 0.35), "B": (0.5, 0.9)})
        ladder = LadderState(m=0, eps_u0=0.2)
        assert select_anchor(reg, ladder, 0.5) == "A"

    def test_fallback_to_narrowest(self):
        reg = make_registry({"A": (0.1, 0.5), "B": (0.3, 0.6), "C": (0.2, 0.5)})
        assert select_anchor(reg, LadderState(m=5, eps_u0=0.1), 0.5) == "B"

    @given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=3, max_size=3), st.integers(0, 4))
    def test_matches_brute_force(self, pairs, m):
        envs = {f"T{k}": tuple(sorted(p)) for k, p in enumerate(pairs)}
        reg = make_registry(envs)
        ladder = LadderState(m=m, eps_u0=1.0)
        gate = max(0.5 * ladder.eps_u, min(hi - lo for lo, hi in envs.values()))
        feasible = [(lo, -k) for k, (lo, hi) in enumerate(envs.values()) if hi - lo <= gate]
        _, neg_k = max(feasible)
        assert select_anchor(reg, ladder, 0.5) == f"T{-neg_k}"


class TestRefineGate:
    def test_cap(self):
        assert not should_refine(0.0, LadderState(m=2, max_depth=2), 0.5)

    def test_arithmetic(self):
        ladder = LadderState(m=3, eps_u0=1.0, max_depth=5)
        assert should_refine(0.04, ladder, 0.5)
        assert should_refine(0.0625, ladder, 0.5)
        assert not should_refine(0.0626, ladder, 0.5)


class TestMaxDepth:
    def test_small_horizon(self):
        assert max_depth(10, 100.0) == 0

    def test_worked_value(self):
        assert math.log(math.e * 4096) ** 2 == pytest.approx(86.83, abs=0.01)
        assert max_depth(4096, 1.0) == 2

    @given(st.integers(1, 10**6), st.floats(0.01, 100))
    def test_monotone_in_horizon(self, T, A):
        assert max_depth(T, A) <= max_depth(T + 1000, A)


class TestRunner:
    def test_task_count_after_level_ups(self, tiny_runner):
        log = tiny_runner(T=60, J=3, max_depth=2).run()
        assert log.ladder.m == 2
        assert log.N_T == 1 + 3 + 3 * 2

    def test_config_rejects_zero_horizon(self):
        with pytest.raises(ValueError):
            SchedulerConfig(T=0)

    def test_one_evaluation_per_round(self, tiny_runner):
        log = tiny_runner().run()
        assert [r.t for r in log.records] == list(range(1, 41))
        assert sum(s.local_counter for s in log.registry) == 40

    def test_levels_nondecreasing_and_bounded(self, tiny_runner):
        log = tiny_runner(T=60).run()
        levels = [r.level_m for r in log.records]
        assert all(a <= b for a, b in zip(levels, levels[1:]))
        assert log.N_T <= 1 + 3 * (log.ladder.peak_depth + 1)

    def test_byte_identical_reruns(self, tiny_runner):
        assert tiny_runner(seed=7).run().to_csv() == tiny_runner(seed=7).run().to_csv()
        assert tiny_runner(seed=7).run().to_csv() != tiny_runner(seed=8).run().to_csv()

    def test_fixed_pool_has_no_generation(self):
        log = run_gsr(TaskSpec("a", ((0.0, 1.0),)), bowl, DirectOracle(lambda s, z: min(max(z, 0), 1)),
                      None, SchedulerConfig(T=10), FAST_ENGINE, seed=1,
                      pool=[TaskSpec("b", ((0.0, 1.0),), {"c": 0.9})])
        assert log.N_T == 2 and log.T == 10

    def test_csv_header(self, tiny_runner):
        header = tiny_runner(T=5).run().to_csv().splitlines()[0].split(",")
        assert header[:4] == ["t", "task_id", "level_m", "x0"]
        assert "U_upper" in header and "votes_used" in header


def _record(t, task_id, f):
    return EvalRecord(t, task_id, 0, (0.0,), f, f, f, math.nan, 0, 1, 0, 1)


class TestRegret:
    def test_optimal_play_has_zero_regret(self):
        recs = [_record(t, "A", 1.0) for t in range(1, 6)]
        assert np.all(task_regret(recs, lambda i, z: z, 1.0) == 0.0)

    def test_single_gap(self):
        assert task_regret([_record(1, "A", 0.7)], lambda i, z: z, 1.0)[0] == pytest.approx(0.3)

    @given(st.lists(st.tuples(st.sampled_from("AB"), st.floats(0, 1)), min_size=1, max_size=40))
    def test_replay(self, plays):
        recs = [_record(t + 1, i, f) for t, (i, f) in enumerate(plays)]
        best, cum, simple = {}, [], []
        running = -math.inf
        for i, f in plays:
            best[i] = max(best.get(i, -math.inf), f)
            cum.append((cum[-1] if cum else 0.0) + 1.0 - best[i])
            running = max(running, best[i])
            simple.append(1.0 - running)
        np.testing.assert_allclose(task_regret(recs, lambda i, z: z, 1.0), cum, atol=1e-12)
        np.testing.assert_allclose(simple_regret(recs, lambda i, z: z, 1.0), simple, atol=1e-12)
        assert np.all(np.diff(simple_regret(recs, lambda i, z: z, 1.0)) <= 0)
