"""Experiment drivers: offline objective selection, unknown search space,
acquisition race, planted-family GSR runs, resolution probes and the
balance-eliminate scenario. Every driver is seeded and returns plain arrays
or row dicts; file output lives in :mod:`gsr.bench.cli`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from ..balance import BalanceEliminate
from ..core import GsrRunner, RunLog, SchedulerConfig, noiseless_incumbents, task_rng
from ..engine import EngineConfig, TaskOptimizer
from ..envelopes import EnvelopeConfig, envelope_constant
from ..generators import (
    DomainDoublingGenerator,
    ExpansionConfig,
    MutationGenerator,
    MutationSchedule,
    estimate_delta_plus,
    gen_mutations,
)
from ..gp import SearchBudget, UcbSchedule
from ..tasks import TaskRegistry, TaskSpec, TaskState, task_distance
from ..utility import (
    CdfUtilityParams,
    CommitteeConfig,
    CommitteeOracle,
    DirectOracle,
    ObjectiveOracle,
    REFERENCE_INTERVAL,
    calibrate_cdf,
    direct_utility_cdf,
    hoeffding_p_interval,
    sigmoid,
    std_normal_cdf,
    transport_interval,
)
from . import baselines
from .functions import BenchmarkSpec
from .planted import (
    PLANTED_SCHEMA,
    UTILITY_LIPSCHITZ,
    five_task_family,
    planted_long_run_value,
    planted_objective,
    planted_optimum,
    planted_seed,
    planted_utility,
    planted_world,
)

EXPERIMENTS = ("offline_fixed", "offline_objective", "unknown_space", "acq_race", "gsr_synthetic", "delta_plus")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    methods: tuple[str, ...] = ()
    T: int = 200
    seeds: tuple[int, ...] = (0,)
    out: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if len(self.seeds) < 1:
            raise ValueError("need at least one seed")


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def summarize(curves: dict[str, list[np.ndarray]]) -> list[dict]:
    """Per-method, per-round mean and standard error across seeds."""
    rows = []
    for method, series in curves.items():
        M = np.vstack(series)
        for t in range(M.shape[1]):
            mu, se = mean_stderr(M[:, t])
            rows.append({"method": method, "t": t + 1, "mean": mu, "stderr": se, "n_seeds": M.shape[0]})
    return rows


def final_summary(curves: dict[str, list[np.ndarray]]) -> dict[str, tuple[float, float]]:
    return {m: mean_stderr([c[-1] for c in series]) for m, series in curves.items()}


# ---------------------------------------------------------------------------
# offline objective selection

OFFLINE_SUITE = ("ackley", "griewank", "levy", "rosenbrock", "styblinski_tang", "hartmann6")
OFFLINE_METHODS = ("gsr", "uniform_random", "round_robin", "successive_halving", "hyperband", "oracle")
OFFLINE_ENGINE = EngineConfig(gap_mode="surrogate", eps0=0.5, n_init=4)
OFFLINE_LIPSCHITZ = 1.0


@lru_cache(maxsize=None)
def _bench(fid: str, dim: int) -> BenchmarkSpec:
    return BenchmarkSpec(fid, dim)


def unit_cube_task(task_id: str, fid: str, dim: int) -> TaskSpec:
    """Task over ``[0, 1]^dim`` mapped affinely onto the benchmark's native box."""
    return TaskSpec(task_id, ((0.0, 1.0),) * dim, {}, notes=fid)


def unit_values(spec: TaskSpec, U) -> np.ndarray:
    bench = _bench(spec.notes, spec.dim)
    U = np.atleast_2d(np.asarray(U, float))
    return bench.value(bench.lower + U * (bench.upper - bench.lower))


def unit_objective(spec: TaskSpec, x, rng):
    f = float(unit_values(spec, x)[0])
    return f, f


def offline_tasks(dim: int = 6, suite: Sequence[str] = OFFLINE_SUITE) -> list[TaskSpec]:
    return [unit_cube_task(fid, fid, dim) for fid in suite]


def calibrate_offline(tasks: Sequence[TaskSpec], seed: int, S: int = 20000) -> dict[str, CdfUtilityParams]:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(17,)))
    out = {}
    for spec in tasks:
        out[spec.task_id] = calibrate_cdf(
            lambda X, spec=spec: unit_values(spec, X), lambda r, n, d=spec.dim: r.random((n, d)), S, rng
        )
    return out


def cdf_utility(params: dict[str, CdfUtilityParams]):
    def utility(spec: TaskSpec, z: float) -> float:
        return direct_utility_cdf(z, params[spec.task_id])

    return utility


def cdf_shortfall(z: float, params: CdfUtilityParams) -> float:
    """``1 - u(z)`` for the CDF utility, without cancellation near ``u = 1``."""
    return std_normal_cdf(-(z - params.mu) / params.sigma)


def cdf_regret(log: RunLog, params: dict[str, CdfUtilityParams], optima: dict[str, float]) -> np.ndarray:
    """Best-so-far regret ``U* - max u`` computed as a difference of shortfalls."""
    best_shortfall = min(cdf_shortfall(optima[k], p) for k, p in params.items())
    inc = noiseless_incumbents(log.records)
    short = [cdf_shortfall(z, params[r.task_id]) for r, z in zip(log.records, inc)]
    return np.minimum.accumulate(short) - best_shortfall


def best_so_far_regret(log: RunLog, utility, U_star: float) -> np.ndarray:
    """``U* - max_{tau <= t} u_{i_tau}(noiseless incumbent)`` for every round."""
    specs = {s.spec.task_id: s.spec for s in log.registry}
    inc = noiseless_incumbents(log.records)
    vals = [utility(specs[r.task_id], z) for r, z in zip(log.records, inc)]
    return U_star - np.maximum.accumulate(vals)


def run_offline_seed(
    seed: int,
    T: int = 200,
    methods: Sequence[str] = OFFLINE_METHODS,
    engine: EngineConfig = OFFLINE_ENGINE,
    dim: int = 6,
    suite: Sequence[str] = OFFLINE_SUITE,
    eta: int = 3,
    calibration_samples: int = 20000,
    lipschitz: float = OFFLINE_LIPSCHITZ,
    init_burst: bool = True,
) -> tuple[dict[str, np.ndarray], dict[str, float]]:
    tasks = offline_tasks(dim, suite)
    params = calibrate_offline(tasks, seed, calibration_samples)
    utility = cdf_utility(params)
    optima = {t.task_id: _bench(t.notes, dim).optimum for t in tasks}
    U = {t.task_id: utility(t, optima[t.task_id]) for t in tasks}
    U_star = max(U.values())
    best_id = max(tasks, key=lambda t: (U[t.task_id], -tasks.index(t))).task_id
    common = dict(seed=seed, objective=unit_objective, engine=engine, utility=utility, init_burst=init_burst)
    curves = {}
    for method in methods:
        if method == "gsr":
            runner = GsrRunner(
                tasks[0], unit_objective, DirectOracle(utility), None,
                SchedulerConfig(T=T, J=1, init_burst=init_burst), engine, EnvelopeConfig(lipschitz=lipschitz),
                seed, pool=tasks[1:],
            )
            log = runner.run()
        elif method == "uniform_random":
            log = baselines.uniform_random(tasks, T, **common)
        elif method == "round_robin":
            log = baselines.round_robin(tasks, T, **common)
        elif method == "successive_halving":
            log = baselines.successive_halving(tasks, T, eta, **common)
        elif method == "hyperband":
            log = baselines.hyperband(tasks, T, T, eta, **common)
        elif method == "oracle":
            log = baselines.oracle_selector(tasks, T, best_id, **common)
        else:
            raise ValueError(f"unknown offline method {method!r}")
        if log.T != T:
            raise AssertionError(f"{method} spent {log.T} evaluations, expected {T}")
        curves[method] = cdf_regret(log, params, optima)
    return curves, U


def run_offline_objective_selection(config: ExperimentConfig):
    methods = config.methods or OFFLINE_METHODS
    curves: dict[str, list[np.ndarray]] = {m: [] for m in methods}
    per_seed = {}
    for seed in config.seeds:
        c, _ = run_offline_seed(seed, config.T, methods, **config.params)
        per_seed[seed] = c
        for m in methods:
            curves[m].append(c[m])
    return per_seed, summarize(curves), final_summary(curves)


# ---------------------------------------------------------------------------
# unknown search space

@dataclass(frozen=True)
class UnknownSpaceProblem:
    fid: str
    true_box: tuple[tuple[float, float], ...]
    initial_box: tuple[tuple[float, float], ...]
    T: int

    @property
    def bench(self) -> BenchmarkSpec:
        return _bench(self.fid, len(self.true_box))


UNKNOWN_SPACE = {
    "beale": UnknownSpaceProblem("beale", ((-4.5, 4.5),) * 2, ((-1.0, 0.0),) * 2, 75),
    "hartmann6": UnknownSpaceProblem("hartmann6", ((0.0, 1.0),) * 6, ((0.0, 0.5),) * 6, 150),
}
UNKNOWN_SPACE_ENGINE = EngineConfig(
    gap_mode="surrogate", eps0=1.0, n_init=4, schedule=UcbSchedule(mode="fixed_beta", fixed_value=5.0), ard=True,
)


def native_objective(spec: TaskSpec, x, rng):
    f = float(_bench(spec.notes, spec.dim).value(x)[0])
    return f, f


def simple_regret_curve(log: RunLog, f_star: float) -> np.ndarray:
    return f_star - np.maximum.accumulate([r.f for r in log.records])


def grid_floor(problem: UnknownSpaceProblem, points: int = 10**6) -> float:
    """``f* - max`` of the objective over a regular grid of the initial box."""
    d = len(problem.initial_box)
    per_axis = max(2, int(round(points ** (1.0 / d))))
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in problem.initial_box]
    best = -math.inf
    # chunk over the first axis to bound memory
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), -1).reshape(-1, d - 1) if d > 1 else None
    for a in axes[0]:
        X = np.column_stack([np.full(len(rest), a), rest]) if rest is not None else np.array([[a]])
        best = max(best, float(problem.bench.value(X).max()))
    return problem.bench.optimum - best


def run_unknown_space_seed(
    problem: UnknownSpaceProblem,
    seed: int,
    T: int | None = None,
    engine: EngineConfig = UNKNOWN_SPACE_ENGINE,
    max_expansions: int = 10,
    eps_u0: float = 1.0,
    c_g: float = 0.5,
    init_burst: bool = True,
) -> dict:
    T = problem.T if T is None else T
    seed_spec = TaskSpec("task1", problem.initial_box, {}, notes=problem.fid)
    gen = DomainDoublingGenerator(ExpansionConfig(2.0, max_expansions, clip_box=problem.true_box))
    runner = GsrRunner(
        seed_spec, native_objective, ObjectiveOracle(), gen,
        SchedulerConfig(T=T, J=1, c_g=c_g, eps_u0=eps_u0, max_depth=max_expansions, init_burst=init_burst),
        engine, EnvelopeConfig(lipschitz=1.0), seed, unbounded=True,
    )
    log = runner.run()
    fixed = baselines.fixed_domain_bo(seed_spec, T, seed, native_objective, engine)
    f_star = problem.bench.optimum
    expansions = max(int(s.spec.objective_params.get("expansions", 0)) for s in log.registry)
    return {
        "gsr": simple_regret_curve(log, f_star),
        "fixed_bo": simple_regret_curve(fixed, f_star),
        "expansions": expansions,
        "log": log,
    }


def run_unknown_space(config: ExperimentConfig):
    problem = UNKNOWN_SPACE[config.params.get("problem", "beale")]
    extra = {k: v for k, v in config.params.items() if k != "problem"}
    curves = {"gsr": [], "fixed_bo": []}
    per_seed = {}
    for seed in config.seeds:
        res = run_unknown_space_seed(problem, seed, config.T, **extra)
        per_seed[seed] = {k: res[k] for k in ("gsr", "fixed_bo")}
        curves["gsr"].append(res["gsr"])
        curves["fixed_bo"].append(res["fixed_bo"])
    return per_seed, summarize(curves), final_summary(curves)


# ---------------------------------------------------------------------------
# acquisition race

RACE_AGENTS = ("ei", "ucb")


@dataclass
class RaceState:
    agents: tuple[str, ...]
    denom: float
    robust_scale: float
    f_star: float
    incumbents: dict[str, list[float]] = field(default_factory=dict)
    simple: dict[str, list[float]] = field(default_factory=dict)
    cumulative: dict[str, list[float]] = field(default_factory=dict)

    def push(self, agent: str, incumbent: float) -> None:
        r = (self.f_star - incumbent) / self.denom
        self.incumbents.setdefault(agent, []).append(incumbent)
        self.simple.setdefault(agent, []).append(r)
        prev = self.cumulative.get(agent, [0.0])
        self.cumulative.setdefault(agent, []).append((prev[-1] if prev else 0.0) + r)

    def score(self, agent: str) -> np.ndarray:
        R = np.asarray(self.cumulative[agent])
        return -R / np.arange(1, R.size + 1)


def race_denominator(bench: BenchmarkSpec, y_init_max: float, rng, n_cal: int = 1024, q: float = 0.10):
    X = bench.lower + rng.random((n_cal, bench.dim)) * (bench.upper - bench.lower)
    robust = float(np.quantile(bench.optimum - bench.value(X), q))
    return max(bench.optimum - y_init_max, robust), robust


def race_gap(state: RaceState, target: str, gap_scale: float = 1.0) -> np.ndarray:
    others = [a for a in state.agents if a != target]
    best_other = np.max([state.score(a) for a in others], axis=0)
    return gap_scale * (state.score(target) - best_other)


def race_utility(gap: np.ndarray, kappa: float = 0.0, tau: float = 0.25) -> np.ndarray:
    return sigmoid((np.maximum.accumulate(gap) - kappa) / tau)


def run_acq_race(
    bench: BenchmarkSpec,
    steps: int,
    seed: int,
    agents: Sequence[str] = RACE_AGENTS,
    target: str = "ei",
    n_init: int = 4,
    engine: EngineConfig = EngineConfig(),
) -> tuple[RaceState, np.ndarray, np.ndarray]:
    """Race acquisition agents on one task from a shared random initial design.

    Returns the race state, the gap series and the utility series.
    """
    if target not in agents or len(agents) < 2:
        raise ValueError("need a target plus at least one competitor")
    spec = TaskSpec("race", bench.bounds, {"noise_sigma": bench.noise_sigma}, notes=bench.fid)
    root = np.random.SeedSequence(seed)
    init_rng = np.random.default_rng(root.spawn(1)[0])
    X0 = bench.lower + init_rng.random((n_init, bench.dim)) * (bench.upper - bench.lower)
    f0 = bench.value(X0)
    y0 = f0 + bench.noise_sigma * init_rng.standard_normal(n_init)
    denom, robust = race_denominator(bench, float(f0.max()), np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(23,))))
    state = RaceState(tuple(agents), denom, robust, bench.optimum)

    def objective(spec, x, rng):
        f = float(bench.value(x)[0])
        return f + bench.noise_sigma * float(rng.standard_normal()), f

    for agent in agents:
        opt = TaskOptimizer(EngineConfig(**{**engine.__dict__, "acquisition": agent, "n_init": 0}))
        ts = TaskState(spec, 1)
        for x, y, f in zip(X0, y0, f0):
            opt.observe(ts, x, float(y), float(f))
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(29, RACE_AGENTS.index(agent))))
        for _ in range(steps):
            opt.step(ts, objective, rng)
            state.push(agent, ts.noiseless_incumbent)
    gap = race_gap(state, target)
    return state, gap, race_utility(gap)


# ---------------------------------------------------------------------------
# planted family

PLANTED_ENGINE = EngineConfig(
    gap_mode="surrogate", eps0=1.0, n_init=4,
    budget=SearchBudget(raw_samples=128, restarts=3, steps=20),
)


def planted_run(
    seed: int,
    T: int = 100,
    sizing_mode: str = "fixed",
    votes: int = 64,
    delta_u: float = 0.05,
    generator: bool = False,
    J: int = 3,
    engine: EngineConfig = PLANTED_ENGINE,
    max_depth: int | None = None,
    envelope: EnvelopeConfig | None = None,
    on_step: Callable[[GsrRunner], None] | None = None,
) -> RunLog:
    """GSR on the planted family: the fixed five-task pool, or mutation from the seed task."""
    oracle = CommitteeOracle(planted_world(), CommitteeConfig(votes, delta_u, sizing_mode=sizing_mode))
    envelope = envelope or EnvelopeConfig(lipschitz=UTILITY_LIPSCHITZ)
    config = SchedulerConfig(T=T, J=J, delta_u=delta_u, max_depth=max_depth)
    if generator:
        runner = GsrRunner(planted_seed(), planted_objective, oracle, MutationGenerator(PLANTED_SCHEMA),
                           config, engine, envelope, seed, schema=PLANTED_SCHEMA)
    else:
        family = five_task_family()
        runner = GsrRunner(family[0], planted_objective, oracle, None, config, engine, envelope, seed,
                           pool=family[1:], schema=PLANTED_SCHEMA)
    while runner.t < T:
        runner.step()
        if on_step is not None:
            on_step(runner)
    return runner.log()


def envelope_validity_run(seed: int, T: int = 100, sizing_mode: str = "fixed", **kwargs) -> dict:
    """Tracks whether every task's known value stays inside its envelope on every round."""
    truth = {s.task_id: planted_long_run_value(s) for s in five_task_family()}
    stats = {"inside_all": True, "width_checks": 0, "width_ok": 0, "first_violation": None}
    C_v = envelope_constant(1.0, "dense")

    def check(runner: GsrRunner) -> None:
        for state in runner.registry:
            if not state.envelope.contains(truth[state.spec.task_id], tol=1e-12):
                if stats["inside_all"]:
                    stats["first_violation"] = (runner.t, state.spec.task_id)
                stats["inside_all"] = False
        played = runner.registry[runner.records[-1].task_id]
        stats["width_checks"] += 1
        bound = C_v * runner.env_cfg.lipschitz * played.eps_f
        stats["width_ok"] += played.envelope.width <= bound + 1e-12

    planted_run(seed, T, sizing_mode, on_step=check, **kwargs)
    return stats


def run_gsr_synthetic(config: ExperimentConfig) -> dict[int, RunLog]:
    p = dict(config.params)
    return {seed: planted_run(seed, config.T, **p) for seed in config.seeds}


# ---------------------------------------------------------------------------
# log-odds transport through a chain of anchors

def transport_chain_trials(n_trials: int = 10_000, K: int = 64, delta: float = 0.01, seed: int = 0,
                           score_range: float = 2.0) -> dict:
    """Three nodes: 0 is the reference, 1 the anchor, 2 the queried node.

    Each trial draws fresh scores, measures 1 vs 0 and 2 vs 1 with ``K`` votes,
    transports the two Hoeffding intervals onto 2 vs 0 and compares with the
    true win rate and with a direct ``K``-vote measurement of 2 vs 0.
    """
    rng = np.random.default_rng(seed)
    covered = agreed = 0
    for _ in range(n_trials):
        theta = rng.uniform(-score_range, score_range, size=3)
        p10, p21, p20 = sigmoid(theta[1] - theta[0]), sigmoid(theta[2] - theta[1]), sigmoid(theta[2] - theta[0])
        k10, k21, k20 = rng.binomial(K, [p10, p21, p20])
        anchor = transport_interval(REFERENCE_INTERVAL, *hoeffding_p_interval(int(k10), K, delta))
        chained = transport_interval(anchor, *hoeffding_p_interval(int(k21), K, delta))
        direct_lo, direct_hi = hoeffding_p_interval(int(k20), K, delta)
        covered += chained.contains(float(p20))
        agreed += chained.lower <= direct_hi and direct_lo <= chained.upper
    return {"trials": n_trials, "covered": covered / n_trials, "agreed": agreed / n_trials}


# ---------------------------------------------------------------------------
# resolution ladder probes

def mutation_distances(level: int, seeds: Sequence[int], J: int = 3,
                       schedule: MutationSchedule = MutationSchedule()) -> list[float]:
    """Distances from the seed task to every accepted child at ``level``."""
    anchor = planted_seed()
    out = []
    for seed in seeds:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(31, level)))
        res = gen_mutations(anchor, level, J, schedule, rng, PLANTED_SCHEMA, anchor_design=(0.7, 0.4))
        out.extend(task_distance(c, anchor, PLANTED_SCHEMA) for c in res.accepted)
    return out


def probe_score(spec: TaskSpec, budget: int, rng: np.random.Generator,
                engine: EngineConfig = PLANTED_ENGINE) -> float:
    """Utility of the noiseless incumbent after a short BO probe."""
    state = TaskState(spec, 1)
    opt = TaskOptimizer(engine)
    for _ in range(budget):
        opt.step(state, planted_objective, rng)
    return planted_utility(spec, state.noiseless_incumbent)


def delta_plus_levels(levels: Sequence[int] = range(5), seeds: Sequence[int] = range(10), J: int = 3,
                      probe_budget: int = 10, eps_u0: float = 1.0,
                      schedule: MutationSchedule = MutationSchedule()) -> list[dict]:
    rows = []
    for m in levels:
        def propose(anchor, m_, J_, rng):
            return gen_mutations(anchor, m_, J_, schedule, rng, PLANTED_SCHEMA, anchor_design=(0.7, 0.4)).accepted

        dp = estimate_delta_plus(
            planted_seed(), m, J, probe_budget, eps_u0 * 2.0**-m,
            [1000 * m + s for s in seeds], propose, probe_score,
        )
        dist = mutation_distances(m, seeds, J, schedule)
        rows.append({"m": m, "mean_distance": float(np.mean(dist)), "delta_plus": dp,
                     "n_children": len(dist)})
    return rows


# ---------------------------------------------------------------------------
# balance-eliminate scenario

BALANCE_TRAP = TaskSpec("task1", ((0.0, 1.0),), {"kind": 0.0})
BALANCE_PEAK = TaskSpec("task2", ((0.0, 1.0),), {"kind": 1.0})
BALANCE_ENGINE = EngineConfig(
    gap_mode="surrogate", eps0=1.0, n_init=2,
    budget=SearchBudget(raw_samples=128, restarts=3, steps=20),
)
# The late task is flat except for a sharp step at the right edge: random
# starting points almost never land on it, while UCB probes the edge soon.
BALANCE_EDGE, BALANCE_EDGE_WIDTH = 0.985, 0.003
BALANCE_FLOOR = 0.37


def balance_objective(spec: TaskSpec, x, rng):
    x = np.asarray(x, float)
    if spec.objective_params["kind"] == 0.0:
        f = 0.6
    else:
        f = float(expit((x[0] - BALANCE_EDGE) / BALANCE_EDGE_WIDTH))
    return f, f


def balance_utility(spec: TaskSpec, z: float) -> float:
    if spec.objective_params["kind"] == 0.0:
        return float(np.clip(z, 0.0, 1.0))
    return float(np.clip(BALANCE_FLOOR + (0.95 - BALANCE_FLOOR) * z, 0.0, 1.0))


BALANCE_VALUES = {"task1": 0.6, "task2": balance_utility(BALANCE_PEAK, float(expit((1.0 - BALANCE_EDGE) / BALANCE_EDGE_WIDTH)))}
BALANCE_L0 = 0.3
BALANCE_SIGMA_U2 = 1e-4


def balance_run(seed: int, T: int = 300, L0: float = BALANCE_L0, n_rungs: int = 2, delta_be: float = 0.05,
                sigma_u2: float = BALANCE_SIGMA_U2, engine: EngineConfig = BALANCE_ENGINE) -> BalanceEliminate:
    """Two rungs over a trap task and a late-blooming task.

    The bottom rung's headroom ``L0 * eps`` stops covering the late task's
    initial shortfall after its starting design, so it locks onto the trap.
    The next rung keeps probing the late task long enough to find the step.
    """
    seq = np.random.SeedSequence(seed)

    def make_runner(j: int, L: float) -> GsrRunner:
        sub = int(seq.generate_state(1)[0]) + 7919 * (j + 1)
        oracle = DirectOracle(balance_utility, sigma_u2=sigma_u2)
        return GsrRunner(
            BALANCE_TRAP, balance_objective, oracle, None, SchedulerConfig(T=T, J=1), engine,
            EnvelopeConfig(lipschitz=L), sub, pool=[BALANCE_PEAK],
        )

    wrapper = BalanceEliminate(make_runner, T, L0, lambda t: 2.0 ** (n_rungs - 1), delta_be, sigma_u2,
                               max_rungs=n_rungs)
    wrapper.run()
    return wrapper
