"""Task-selection baselines over a fixed pool, sharing the GSR inner optimizer."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..core import LadderState, RunLog, task_rng
from ..engine import EngineConfig, TaskOptimizer
from ..tasks import EvalRecord, TaskRegistry, TaskSpec

Utility = Callable[[TaskSpec, float], float]


class PoolRunner:
    """One BO step per :meth:`play` on a chosen task; logs utility of the incumbent."""

    def __init__(self, tasks: Sequence[TaskSpec], objective, engine: EngineConfig, utility: Utility | None,
                 seed: int, T: int, init_burst: bool = False):
        if not tasks:
            raise ValueError("need at least one task")
        self.registry = TaskRegistry()
        for spec in tasks:
            self.registry.register(spec)
        self.objective = objective
        self.optimizer = TaskOptimizer(engine)
        self.utility = utility
        self.seed = seed
        self.T = T
        self.init_burst = init_burst
        self.records: list[EvalRecord] = []
        self._rngs: dict[str, np.random.Generator] = {}

    @property
    def t(self) -> int:
        return len(self.records)

    @property
    def done(self) -> bool:
        return self.t >= self.T

    def value(self, task_id: str) -> float:
        state = self.registry[task_id]
        if state.local_counter == 0:
            return -math.inf
        if self.utility is None:
            return state.incumbent
        return float(self.utility(state.spec, state.incumbent))

    def play(self, task_id: str) -> int:
        """One evaluation, or the whole initial design on a first visit with ``init_burst``.

        Returns the number of evaluations spent.
        """
        if self.done:
            raise RuntimeError("budget exhausted")
        state = self.registry[task_id]
        n = max(1, self.optimizer.config.n_init) if self.init_burst and state.local_counter == 0 else 1
        start = self.t
        while self.t - start < n and not self.done:
            self._one(state)
        return self.t - start

    def _one(self, state) -> EvalRecord:
        task_id = state.spec.task_id
        rng = self._rngs.setdefault(task_id, task_rng(self.seed, state.index))
        x, y, f = self.optimizer.step(state, self.objective, rng)
        u = self.value(task_id)
        rec = EvalRecord(
            t=self.t + 1, task_id=task_id, level_m=0, x=tuple(float(v) for v in x), y=float(y), f=float(f),
            incumbent=state.incumbent, u_tilde=u, u_lower=u, u_upper=u, U_lower=u, U_upper=u,
        )
        self.records.append(rec)
        return rec

    def log(self) -> RunLog:
        return RunLog(self.records, self.registry, LadderState())


def _ids(tasks: Sequence[TaskSpec]) -> list[str]:
    return [t.task_id for t in tasks]


def round_robin(tasks, T, seed=0, objective=None, engine=EngineConfig(), utility=None, init_burst=False) -> RunLog:
    runner = PoolRunner(tasks, objective, engine, utility, seed, T, init_burst)
    ids = _ids(tasks)
    while not runner.done:
        runner.play(ids[runner.t % len(ids)])
    return runner.log()


def uniform_random(tasks, T, seed=0, objective=None, engine=EngineConfig(), utility=None, init_burst=False) -> RunLog:
    runner = PoolRunner(tasks, objective, engine, utility, seed, T, init_burst)
    ids = _ids(tasks)
    pick = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))
    while not runner.done:
        runner.play(ids[int(pick.integers(len(ids)))])
    return runner.log()


def halving_stages(K: int, eta: int) -> list[int]:
    """Survivor counts per stage: prune to ``ceil(n/eta)`` while ``n >= eta``."""
    if eta < 2:
        raise ValueError("eta must be >= 2")
    sizes = [K]
    while sizes[-1] >= eta:
        sizes.append(math.ceil(sizes[-1] / eta))
    return sizes


def _spend_evenly(runner: PoolRunner, ids: list[str], budget: int) -> None:
    stop = min(runner.T, runner.t + budget)
    k = 0
    while runner.t < stop:
        runner.play(ids[k % len(ids)])
        k += 1


def _top(runner: PoolRunner, ids: list[str], keep: int) -> list[str]:
    order = sorted(ids, key=lambda i: (-runner.value(i), ids.index(i)))
    return order[:keep]


def successive_halving(tasks, T, eta=3, seed=0, objective=None, engine=EngineConfig(), utility=None,
                       init_burst=False) -> RunLog:
    """Equal per-task budgets within a stage, pruning by observed utility between stages."""
    runner = PoolRunner(tasks, objective, engine, utility, seed, T, init_burst)
    sizes = halving_stages(len(tasks), eta)
    per_stage = T // len(sizes)
    alive = _ids(tasks)
    for k, size in enumerate(sizes):
        alive = _top(runner, alive, size) if k else alive
        budget = T - runner.t if k == len(sizes) - 1 else per_stage
        _spend_evenly(runner, alive, budget)
    return runner.log()


def hyperband_schedule(R: float, eta: int) -> list[list[tuple[int, float]]]:
    """Brackets of (configurations, resource per configuration), most exploratory first."""
    if eta < 2:
        raise ValueError("eta must be >= 2")
    if R < 1:
        raise ValueError("R must be >= 1")
    s_max = 0
    while eta ** (s_max + 1) <= R:
        s_max += 1
    brackets = []
    for s in range(s_max, -1, -1):
        n = math.ceil((s_max + 1) * eta**s / (s + 1))
        r = R / eta**s
        brackets.append([(n // eta**i, r * eta**i) for i in range(s + 1)])
    return brackets


def hyperband(tasks, T, R=None, eta=3, seed=0, objective=None, engine=EngineConfig(), utility=None,
              init_burst=False) -> RunLog:
    """Brackets of inner successive halving; halts once ``T`` evaluations are spent.

    A bracket samples ``min(n, K)`` tasks. Task states persist across brackets;
    resources are evaluations spent on a task inside the current bracket.
    """
    runner = PoolRunner(tasks, objective, engine, utility, seed, T, init_burst)
    ids = _ids(tasks)
    pick = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(13,)))
    R = T if R is None else R
    while not runner.done:
        for bracket in hyperband_schedule(R, eta):
            n0 = bracket[0][0]
            chosen = sorted(pick.choice(len(ids), size=min(n0, len(ids)), replace=False).tolist())
            alive = [ids[c] for c in chosen]
            spent = dict.fromkeys(alive, 0)
            for i, (n_i, r_i) in enumerate(bracket):
                if i:
                    alive = _top(runner, alive, min(len(alive), max(1, n_i)))
                target = max(1, int(math.floor(r_i + 1e-9)))
                for task_id in alive:
                    while spent[task_id] < target and not runner.done:
                        spent[task_id] += runner.play(task_id)
                if runner.done:
                    return runner.log()
    return runner.log()


def oracle_selector(tasks, T, best_task_id, seed=0, objective=None, engine=EngineConfig(), utility=None,
                    init_burst=False) -> RunLog:
    runner = PoolRunner(tasks, objective, engine, utility, seed, T, init_burst)
    while not runner.done:
        runner.play(best_task_id)
    return runner.log()


def fixed_domain_bo(spec: TaskSpec, T, seed=0, objective=None, engine=EngineConfig(), utility=None) -> RunLog:
    return oracle_selector([spec], T, spec.task_id, seed, objective, engine, utility)
