import math
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from gsr.bench import experiments as ex
from gsr.bench.baselines import (
    PoolRunner,
    halving_stages,
    hyperband,
    hyperband_schedule,
    round_robin,
    successive_halving,
    uniform_random,
)
from gsr.bench.cli import main
from gsr.bench.functions import FUNCTIONS, BenchmarkSpec, eval_benchmark
from gsr.engine import EngineConfig
from gsr.gp import SearchBudget
from gsr.tasks import TaskSpec

FAST_ENGINE = EngineConfig(fit_kernel=False, n_init=1, budget=SearchBudget(32, 2, 5))


def quadratic(spec, x, rng):
    f = -float((np.asarray(x)[0] - spec.objective_params.get("c", 0.5)) ** 2)
    return f, f


@pytest.fixture
def pool():
    return [TaskSpec(f"task{k + 1}", ((0.0, 1.0),), {"c": 0.2 * k}) for k in range(3)]


class TestFunctions:
    @pytest.mark.parametrize("fid,dim", [("branin", 2), ("hartmann6", 6), ("ackley", 3), ("beale", 2),
                                         ("levy", 4), ("rosenbrock", 3), ("griewank", 2), ("six_hump_camel", 2),
                                         ("styblinski_tang", 3)])
    def test_value_at_minimizers(self, fid, dim):
        spec = BenchmarkSpec(fid, dim)
        for x in spec.minimizers:
            assert spec.value(x)[0] == pytest.approx(spec.optimum, abs=1e-4)

    def test_published_optima(self):
        assert BenchmarkSpec("branin").optimum == pytest.approx(-0.397887)
        assert BenchmarkSpec("hartmann6").optimum == pytest.approx(3.322368)
        assert BenchmarkSpec("ackley", 5).raw(np.zeros(5))[0] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("fid", ["branin", "hartmann6", "beale", "six_hump_camel"])
    def test_local_search_finds_nothing_better(self, fid):
        spec = BenchmarkSpec(fid)
        for x in spec.minimizers:
            res = minimize(lambda z: float(spec.raw(z)[0]), x, bounds=spec.bounds, method="L-BFGS-B")
            assert -res.fun <= spec.optimum + 1e-4

    @given(st.lists(st.floats(-1, 1), min_size=2, max_size=2))
    def test_branin_against_closed_form(self, u):
        x1, x2 = 2.5 + 7.5 * u[0], 7.5 + 7.5 * u[1]
        expect = (x2 - 5.1 * x1**2 / (4 * math.pi**2) + 5 * x1 / math.pi - 6) ** 2
        expect += 10 * (1 - 1 / (8 * math.pi)) * math.cos(x1) + 10
        assert FUNCTIONS["branin"](np.array([[x1, x2]]))[0] == pytest.approx(expect)

    def test_fixed_dimension_enforced(self):
        assert BenchmarkSpec("hartmann6", 2).dim == 6

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            eval_benchmark(BenchmarkSpec("branin"), [11.0, 0.0])

    def test_noise_reproducible(self):
        spec = BenchmarkSpec("branin", noise_sigma=0.1)
        a = eval_benchmark(spec, [0.0, 5.0], np.random.default_rng(4))
        b = eval_benchmark(spec, [0.0, 5.0], np.random.default_rng(4))
        assert a == b != spec.value([0.0, 5.0])[0]

    def test_unknown_id(self):
        with pytest.raises(ValueError):
            BenchmarkSpec("nope")


class TestBaselines:
    def test_round_robin_counts(self, pool):
        log = round_robin(pool, 7, objective=quadratic, engine=FAST_ENGINE)
        counts = [s.local_counter for s in log.registry]
        assert counts == [3, 2, 2]

    def test_uniform_counts_within_three_sigma(self, pool):
        runner = PoolRunner(pool, quadratic, FAST_ENGINE, None, 0, 6000)
        pick = np.random.default_rng(np.random.SeedSequence(0, spawn_key=(11,)))
        counts = np.bincount(pick.integers(3, size=6000), minlength=3)
        sigma = math.sqrt(6000 * (1 / 3) * (2 / 3))
        assert np.all(np.abs(counts - 2000) <= 3 * sigma)
        assert runner.T == 6000

    def test_uniform_respects_budget(self, pool):
        log = uniform_random(pool, 25, seed=2, objective=quadratic, engine=FAST_ENGINE)
        assert log.T == 25 and sum(s.local_counter for s in log.registry) == 25

    def test_halving_stage_sizes(self):
        assert halving_stages(6, 3) == [6, 2]
        assert halving_stages(2, 3) == [2]
        assert halving_stages(27, 3) == [27, 9, 3, 1]
        with pytest.raises(ValueError):
            halving_stages(5, 1)

    def test_hyperband_table(self):
        table = [
            [(81, 1), (27, 3), (9, 9), (3, 27), (1, 81)],
            [(34, 3), (11, 9), (3, 27), (1, 81)],
            [(15, 9), (5, 27), (1, 81)],
            [(8, 27), (2, 81)],
            [(5, 81)],
        ]
        got = hyperband_schedule(81, 3)
        assert len(got) == 5
        for bracket, expect in zip(got, table):
            assert [(n, pytest.approx(r)) for n, r in bracket] == expect

    @pytest.mark.parametrize("method", [successive_halving, hyperband])
    def test_budget_exact(self, pool, method):
        log = method(pool, 30, seed=1, objective=quadratic, engine=FAST_ENGINE)
        assert log.T == 30
        assert [r.t for r in log.records] == list(range(1, 31))

    @pytest.mark.parametrize("method", [round_robin, uniform_random, successive_halving, hyperband])
    def test_seed_determinism(self, pool, method):
        a = method(pool, 20, seed=5, objective=quadratic, engine=FAST_ENGINE).to_csv()
        b = method(pool, 20, seed=5, objective=quadratic, engine=FAST_ENGINE).to_csv()
        assert a == b

    def test_halving_keeps_best_task(self, pool):
        log = successive_halving(pool, 30, seed=0, objective=quadratic, engine=FAST_ENGINE)
        last = [r.task_id for r in log.records[-5:]]
        assert len(set(last)) <= 2

    def test_runner_refuses_past_budget(self, pool):
        runner = PoolRunner(pool, quadratic, FAST_ENGINE, None, 0, 1)
        runner.play("task1")
        with pytest.raises(RuntimeError):
            runner.play("task1")


class TestRace:
    def test_identical_agents_tie(self):
        state = ex.RaceState(("a", "b"), 2.0, 1.0, 1.0)
        for inc in [0.1, 0.4, 0.4, 0.8]:
            state.push("a", inc)
            state.push("b", inc)
        gap = ex.race_gap(state, "a")
        np.testing.assert_allclose(gap, 0.0)
        np.testing.assert_allclose(ex.race_utility(gap), 0.5)

    def test_score_replay(self):
        state = ex.RaceState(("a", "b"), 2.0, 1.0, 1.0)
        incs = [0.0, 0.5, 1.0]
        for inc in incs:
            state.push("a", inc)
        regrets = [(1.0 - i) / 2.0 for i in incs]
        expect = [-sum(regrets[: s + 1]) / (s + 1) for s in range(3)]
        np.testing.assert_allclose(state.score("a"), expect)

    def test_run_on_branin(self):
        state, gap, util = ex.run_acq_race(BenchmarkSpec("branin"), 6, 0,
                                           engine=EngineConfig(budget=SearchBudget(64, 2, 10)))
        assert state.denom > 0
        assert gap.shape == util.shape == (6,)
        assert np.all(np.diff(util) >= 0)
        assert np.all((util > 0) & (util < 1))

    def test_target_must_be_racing(self):
        with pytest.raises(ValueError):
            ex.run_acq_race(BenchmarkSpec("branin"), 2, 0, agents=("ei",))


class TestGridFloor:
    def test_nonnegative(self):
        problem = ex.UNKNOWN_SPACE["beale"]
        assert ex.grid_floor(problem, 10**4) >= 0.0


class TestCli:
    def test_missing_config(self, tmp_path, capsys):
        path = str(tmp_path / "nope.toml")
        assert main(["run", "--config", path]) == 2
        assert path in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text("[gp]\nwhatever = 1\n")
        assert main(["run", "--config", str(cfg)]) == 2
        assert "whatever" in capsys.readouterr().err

    def test_no_subcommand(self):
        assert main([]) == 2

    def test_run_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            assert main(["run", "--seed", "7", "--T", "12", "--out", str(tmp_path / d)]) == 0
        a = (tmp_path / "a" / "run_seed7.csv").read_bytes()
        assert a == (tmp_path / "b" / "run_seed7.csv").read_bytes()
        assert a.splitlines()[0].startswith(b"t,task_id,level_m")

    def test_offline_outputs(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('[experiment]\nmethods = ["round_robin", "uniform_random"]\n')
        out = tmp_path / "out"
        assert main(["offline", "--config", str(cfg), "--seeds", "2", "--T", "8", "--out", str(out)]) == 0
        assert sorted(os.listdir(out)) == ["offline_seed0.csv", "offline_seed1.csv", "offline_summary.csv"]

    def test_json_format(self, tmp_path):
        assert main(["run", "--T", "5", "--format", "json", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "run_seed0.json").exists()
