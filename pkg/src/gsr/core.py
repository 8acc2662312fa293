"""The Generate-Select-Refine meta-loop.

One round: pick the task with the highest optimistic value, run one GP-UCB
step on it, ask for utility feedback, refresh its envelope, pick the anchor
and, when the anchor is resolved finely enough, step up the resolution ladder
and generate a new batch of tasks around the anchor.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import envelopes
from .engine import EngineConfig, TaskOptimizer
from .envelopes import EnvelopeConfig, envelope_constant
from .gp import c_lambda
from .tasks import EvalRecord, TaskRegistry, TaskSchema, TaskSpec, TaskState
from .utility import QueryContext, UtilityFeedback

Objective = Callable[[TaskSpec, np.ndarray, np.random.Generator], "tuple[float, float]"]


@dataclass(frozen=True)
class SchedulerConfig:
    T: int = 200
    J: int = 3
    c_g: float = 0.5
    eps_u0: float = 1.0
    delta_f: float = 0.05
    delta_u: float = 0.05
    delta_minus: float = 0.05
    max_depth: int | None = None
    init_burst: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("horizon T must be >= 1")
        if self.J < 1:
            raise ValueError("batch size J must be >= 1")
        if not 0.0 < self.c_g <= 1.0:
            raise ValueError("c_g must lie in (0, 1]")
        if not self.eps_u0 > 0.0:
            raise ValueError("eps_u0 must be positive")


def task_rng(seed: int, index: int) -> np.random.Generator:
    """Evaluation stream of the ``index``-th registered task.

    Keyed by (seed, index) so that any two selectors sharing a seed see the
    same within-task trajectory for the same task.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7, index)))


def max_depth(T: int, A_T: float) -> int:
    if T < 1:
        raise ValueError("T must be >= 1")
    if not A_T > 0.0:
        raise ValueError("A_T must be positive")
    ratio = T / (A_T * math.log(math.e * T) ** 2)
    if ratio < 1.0:
        return 0
    return int(math.floor(0.5 * math.log2(ratio)))


def depth_constant(C_v: float, lipschitz: float, lam: float, psi: float, c_g: float, eps_u0: float) -> float:
    return (2.0 * C_v * lipschitz * math.sqrt(c_lambda(lam) * psi) / (c_g * eps_u0)) ** 2


@dataclass
class LadderState:
    m: int = 0
    eps_u0: float = 1.0
    max_depth: int = 0
    psi_running: float = 0.0
    T: int = 1
    peak_depth: int = 0

    @property
    def eps_u(self) -> float:
        return self.eps_u0 * 2.0**-self.m

    @property
    def lambda_T(self) -> float:
        return math.log(math.e * self.T)


def _by_upper(state: TaskState):
    return (state.envelope.upper, -state.local_counter, -state.index)


def select_task(registry: TaskRegistry, warmup: int = 0) -> str:
    """Task-UCB choice; a task still inside its first ``warmup`` evaluations is finished first."""
    if len(registry) == 0:
        raise ValueError("registry is empty")
    if warmup > 1:
        pending = [s for s in registry if 0 < s.local_counter < warmup]
        if pending:
            return min(pending, key=lambda s: s.index).spec.task_id
    return max(registry, key=_by_upper).spec.task_id


def select_anchor(registry: TaskRegistry, ladder: LadderState, c_g: float) -> str:
    if len(registry) == 0:
        raise ValueError("registry is empty")
    states = list(registry)
    min_width = min(s.envelope.width for s in states)
    threshold = max(c_g * ladder.eps_u, min_width)
    feasible = [s for s in states if s.envelope.width <= threshold]
    best = max(feasible, key=lambda s: (s.envelope.lower, -s.index))
    return best.spec.task_id


def should_refine(width: float, ladder: LadderState, c_g: float) -> bool:
    return ladder.m < ladder.max_depth and width <= c_g * ladder.eps_u


@dataclass
class RunLog:
    records: list[EvalRecord]
    registry: TaskRegistry
    ladder: LadderState
    votes_total: int = 0
    extra_columns: tuple[str, ...] = ()

    @property
    def N_T(self) -> int:
        return len(self.registry)

    @property
    def T(self) -> int:
        return len(self.records)

    def best_task(self) -> tuple[str, np.ndarray | None]:
        """Task with the highest pessimistic value and its incumbent design."""
        evaluated = [s for s in self.registry if s.local_counter > 0]
        best = max(evaluated, key=lambda s: (s.envelope.lower, s.incumbent, -s.index))
        return best.spec.task_id, best.incumbent_x

    def header(self) -> list[str]:
        dmax = max((len(r.x) for r in self.records), default=0)
        return (
            ["t", "task_id", "level_m"]
            + [f"x{k}" for k in range(dmax)]
            + ["y", "incumbent", "u_lower", "u_upper", "U_lower", "U_upper", "width", "event", "votes_used"]
            + list(self.extra_columns)
        )

    def rows(self) -> list[list[str]]:
        dmax = max((len(r.x) for r in self.records), default=0)
        out = []
        for r in self.records:
            xs = [repr(float(v)) for v in r.x] + [""] * (dmax - len(r.x))
            row = [str(r.t), r.task_id, str(r.level_m), *xs]
            row += [repr(float(v)) for v in (r.y, r.incumbent, r.u_lower, r.u_upper, r.U_lower, r.U_upper, r.width)]
            row += [r.event, str(r.votes_used)]
            row += [_fmt(r.extra.get(c, "")) for c in self.extra_columns]
            out.append(row)
        return out

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        writer.writerows(self.rows())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


class GsrRunner:
    """Steppable GSR run; :func:`run_gsr` drives it for ``T`` rounds.

    ``objective(spec, x, rng)`` returns ``(observed, noiseless)``. ``generator``
    may be ``None`` for a fixed task pool, in which case the loop reduces to
    task-UCB over ``pool``.
    """

    def __init__(
        self,
        seed_spec: TaskSpec,
        objective: Objective,
        oracle,
        generator=None,
        config: SchedulerConfig = SchedulerConfig(),
        engine: EngineConfig = EngineConfig(),
        envelope: EnvelopeConfig = EnvelopeConfig(),
        seed: int = 0,
        pool: Sequence[TaskSpec] = (),
        schema: TaskSchema | None = None,
        unbounded: bool = False,
    ):
        self.objective = objective
        self.oracle = oracle
        self.generator = generator
        self.config = config
        self.optimizer = TaskOptimizer(engine)
        self.env_cfg = envelope
        self.schema = schema
        self.seed = seed
        seq = np.random.SeedSequence(seed)
        _, self.rng_oracle, self.rng_gen = (np.random.default_rng(s) for s in seq.spawn(3))
        self._task_rngs: dict[str, np.random.Generator] = {}
        self.registry = TaskRegistry(unbounded=unbounded)
        self.registry.register(seed_spec, schema)
        for spec in pool:
            self.registry.register(spec, schema)
        self.C_v = envelope_constant(envelope.c_u, envelope.schedule)
        self.ladder = LadderState(0, config.eps_u0, 0, 0.0, config.T)
        if engine.gap_mode == "surrogate":
            self._raise_psi(engine.eps0**2 / (4.0 * c_lambda(engine.noise_lambda)))
        self._refresh_depth()
        self.anchor_id: str | None = None
        self.t = 0
        self.records: list[EvalRecord] = []
        if generator is not None:
            self._generate(seed_spec.task_id, 0, t=0)

    # ladder --------------------------------------------------------------
    def _raise_psi(self, psi: float) -> None:
        self.ladder.psi_running = max(self.ladder.psi_running, psi)

    def _refresh_depth(self) -> None:
        cfg = self.config
        if cfg.max_depth is not None:
            self.ladder.max_depth = cfg.max_depth
        elif self.ladder.psi_running > 0.0:
            A = depth_constant(
                self.C_v, self.env_cfg.lipschitz, self.optimizer.config.noise_lambda,
                self.ladder.psi_running, cfg.c_g, cfg.eps_u0,
            )
            self.ladder.max_depth = max_depth(cfg.T, A)
        self.ladder.peak_depth = max(self.ladder.peak_depth, self.ladder.max_depth)

    def gap_upper(self, s: int) -> float:
        """Causal upper bound on the gap after ``s`` steps for any task so far."""
        return 2.0 * math.sqrt(c_lambda(self.optimizer.config.noise_lambda) * self.ladder.psi_running / s)

    def _generate(self, anchor_id: str, m: int, t: int) -> None:
        anchor = self.registry[anchor_id]
        base = len(self.registry)
        res = self.generator(
            anchor, m, self.config.J, self.rng_gen, self.registry,
            lambda j: f"task{base + j + 1}",
        )
        for spec in res.accepted:
            self.registry.register(spec, self.schema)
        if res.accepted:
            self.registry.log(t, "generate", ",".join(s.task_id for s in res.accepted))
        else:
            self.registry.log(t, "empty_generation", f"anchor={anchor_id} m={m}")

    # rounds --------------------------------------------------------------
    def step(self) -> EvalRecord:
        self.t += 1
        t = self.t
        warmup = self.optimizer.config.n_init if self.config.init_burst else 0
        task_id = select_task(self.registry, warmup)
        state = self.registry[task_id]
        rng = self._task_rngs.setdefault(task_id, task_rng(self.seed, state.index))
        x, y, f = self.optimizer.step(state, self.objective, rng)
        if self.optimizer.config.gap_mode == "theoretical":
            self._raise_psi(state.psi)
            self._refresh_depth()

        feedback: UtilityFeedback | None = None
        s = state.local_counter
        if envelopes.checkpoint_due(s, self.env_cfg.schedule):
            anchor = self.registry[self.anchor_id] if self.anchor_id is not None else None
            ctx = QueryContext(
                s, state.eps_f, self.env_cfg.c_u, self.env_cfg.lipschitz,
                state.beta, state.gamma, self.optimizer.config.noise_lambda,
            )
            feedback = self.oracle.query(state, anchor, ctx, self.rng_oracle)
        envelopes.advance(state, feedback, self.env_cfg)

        event = "eval"
        warming = self.config.init_burst and s < self.optimizer.config.n_init
        if self.generator is not None:
            self.anchor_id = select_anchor(self.registry, self.ladder, self.config.c_g)
            anchor = self.registry[self.anchor_id]
            if not warming and should_refine(anchor.envelope.width, self.ladder, self.config.c_g):
                self.ladder.m += 1
                self.registry.log(t, "level_up", f"m={self.ladder.m} anchor={self.anchor_id}")
                self._generate(self.anchor_id, self.ladder.m, t)
                event = "level_up"
        else:
            self.anchor_id = select_anchor(self.registry, self.ladder, self.config.c_g)

        rec = EvalRecord(
            t=t,
            task_id=task_id,
            level_m=self.ladder.m,
            x=tuple(float(v) for v in x),
            y=float(y),
            f=float(f),
            incumbent=state.incumbent,
            u_tilde=feedback.u_tilde if feedback is not None else math.nan,
            u_lower=state.interval.lower,
            u_upper=state.interval.upper,
            U_lower=state.envelope.lower,
            U_upper=state.envelope.upper,
            event=event,
            votes_used=feedback.votes if feedback is not None else 0,
        )
        self.records.append(rec)
        self.registry.log(t, "eval", task_id)
        return rec

    def log(self) -> RunLog:
        return RunLog(self.records, self.registry, self.ladder, self.oracle.votes_total)

    def run(self) -> RunLog:
        while self.t < self.config.T:
            self.step()
        return self.log()


def run_gsr(
    seed_spec: TaskSpec,
    objective: Objective,
    oracle,
    generator=None,
    config: SchedulerConfig = SchedulerConfig(),
    engine: EngineConfig = EngineConfig(),
    envelope: EnvelopeConfig = EnvelopeConfig(),
    seed: int = 0,
    **kwargs,
) -> RunLog:
    return GsrRunner(seed_spec, objective, oracle, generator, config, engine, envelope, seed, **kwargs).run()


def noiseless_incumbents(records: Iterable[EvalRecord]) -> list[float]:
    """Noiseless best-so-far value of the played task at each round (replayed)."""
    best: dict[str, float] = {}
    out = []
    for r in records:
        best[r.task_id] = max(best.get(r.task_id, -math.inf), r.f)
        out.append(best[r.task_id])
    return out


def task_regret(
    records: Iterable[EvalRecord],
    utility: Callable[[str, float], float],
    U_star: float,
) -> np.ndarray:
    """Cumulative regret ``sum_t (U* - u_{i_t}(noiseless incumbent))``."""
    records = list(records)
    inc = noiseless_incumbents(records)
    gaps = [U_star - utility(r.task_id, z) for r, z in zip(records, inc)]
    return np.cumsum(gaps)


def simple_regret(
    records: Iterable[EvalRecord],
    utility: Callable[[str, float], float],
    U_star: float,
) -> np.ndarray:
    """Best-so-far regret ``U* - max_{tau <= t} u(noiseless incumbent)``."""
    records = list(records)
    inc = noiseless_incumbents(records)
    vals = np.maximum.accumulate([utility(r.task_id, z) for r, z in zip(records, inc)])
    return U_star - vals
