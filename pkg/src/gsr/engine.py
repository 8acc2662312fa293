"""Per-task GP-UCB optimizer shared by the meta-loop and every baseline.

The optimizer keeps its bookkeeping on :class:`~gsr.tasks.TaskState`
(kernel, beta, information gain, gap) so that task states stay the single
source of truth. Inputs are mapped to the unit cube of each task box and
outputs are standardized inside the GP only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gp import (
    DEFAULT_LENGTHSCALE_GRID,
    DEFAULT_OUTPUT_SCALE_GRID,
    GpDataset,
    IllConditionedError,
    KernelSpec,
    SearchBudget,
    UcbSchedule,
    beta as beta_schedule,
    expected_improvement,
    fit_hyperparameters,
    fit_posterior,
    kernel_grid,
    maximize_acquisition,
    opt_gap,
    per_task_delta,
    refine_ard,
    stable_cholesky,
    ucb_values,
)
from .tasks import TaskState, record_eval


@dataclass(frozen=True)
class EngineConfig:
    kernel_family: str = "matern52"
    noise_lambda: float = 1e-4
    standardize: bool = True
    refit_every: int = 5
    fit_kernel: bool = True
    fixed_kernel: KernelSpec | None = None
    lengthscale_grid: tuple[float, ...] = DEFAULT_LENGTHSCALE_GRID
    output_scale_grid: tuple[float, ...] = DEFAULT_OUTPUT_SCALE_GRID
    ard: bool = False
    schedule: UcbSchedule = field(default_factory=UcbSchedule)
    gap_mode: str = "surrogate"
    eps0: float = 1.0
    delta_f: float = 0.05
    budget: SearchBudget = field(default_factory=SearchBudget)
    n_init: int = 4
    acquisition: str = "ucb"

    def __post_init__(self):
        if self.gap_mode not in ("theoretical", "surrogate"):
            raise ValueError(f"unknown gap mode {self.gap_mode!r}")
        if self.acquisition not in ("ucb", "ei"):
            raise ValueError(f"unknown acquisition {self.acquisition!r}")
        if self.n_init < 0 or self.refit_every < 1:
            raise ValueError("n_init must be >= 0 and refit_every >= 1")


class TaskOptimizer:
    """Proposes designs for a task and maintains its gap bound."""

    def __init__(self, config: EngineConfig = EngineConfig()):
        self.config = config

    # coordinates -------------------------------------------------------
    @staticmethod
    def _to_unit(state: TaskState, X) -> np.ndarray:
        lo, hi = state.spec.lower, state.spec.upper
        return (np.atleast_2d(np.asarray(X, float)) - lo) / (hi - lo)

    @staticmethod
    def _from_unit(state: TaskState, U) -> np.ndarray:
        lo, hi = state.spec.lower, state.spec.upper
        return np.clip(lo + np.asarray(U, float) * (hi - lo), lo, hi)

    def _kernel(self, state: TaskState) -> KernelSpec:
        if self.config.fixed_kernel is not None:
            return self.config.fixed_kernel
        if state.kernel is None:
            state.kernel = KernelSpec.default(state.spec.dim, self.config.kernel_family)
        return state.kernel

    def _standardized(self, state: TaskState) -> tuple[np.ndarray, float, float]:
        y = np.asarray(state.y, float)
        if not self.config.standardize or y.size == 0:
            return y, 0.0, 1.0
        mu = float(y.mean())
        sd = float(y.std()) if y.size > 1 else 0.0
        if not sd > 1e-12:
            sd = 1.0
        return (y - mu) / sd, mu, sd

    def dataset(self, state: TaskState) -> GpDataset:
        y, _, _ = self._standardized(state)
        X = self._to_unit(state, np.asarray(state.X)) if state.X else np.zeros((0, state.spec.dim))
        return GpDataset(X, y, self.config.noise_lambda)

    def _maybe_refit(self, state: TaskState, data: GpDataset) -> KernelSpec:
        cfg = self.config
        kernel = self._kernel(state)
        if cfg.fixed_kernel is not None or not cfg.fit_kernel or len(data) < 2:
            return kernel
        s = len(data)
        if state.last_refit == 0 or s - state.last_refit >= cfg.refit_every:
            grid = kernel_grid(
                state.spec.dim, cfg.kernel_family, cfg.lengthscale_grid, cfg.output_scale_grid
            )
            state.kernel = fit_hyperparameters(data, grid, previous=kernel)
            if cfg.ard:
                state.kernel = refine_ard(data, state.kernel)
            state.last_refit = s
        return state.kernel

    # proposals ---------------------------------------------------------
    def propose(self, state: TaskState, rng: np.random.Generator) -> np.ndarray:
        cfg = self.config
        d = state.spec.dim
        if state.local_counter < max(cfg.n_init, 1):
            return self._from_unit(state, rng.random(d))
        data = self.dataset(state)
        kernel = self._maybe_refit(state, data)
        try:
            post = fit_posterior(data, kernel)
        except IllConditionedError:
            return self._from_unit(state, rng.random(d))
        lo, hi = np.zeros(d), np.ones(d)
        if cfg.acquisition == "ei":
            best = float(data.outputs.max())
            acq = lambda U: expected_improvement(post, best, U)  # noqa: E731
        else:
            b = self.next_beta(state)
            acq = lambda U: ucb_values(post, b, U)  # noqa: E731
        u, _ = maximize_acquisition(acq, lo, hi, cfg.budget, rng)
        return self._from_unit(state, u)

    def next_beta(self, state: TaskState) -> float:
        return self._beta(state.local_counter + 1, state.gamma, state.index)

    def _beta(self, s: int, gamma_prev: float, index: int) -> float:
        sched = self.config.schedule
        if sched.mode == "theoretical":
            sched = UcbSchedule(
                sched.rkhs_bound, sched.noise_proxy, per_task_delta(index, self.config.delta_f),
                "theoretical", sched.fixed_value,
            )
        return beta_schedule(s, gamma_prev, sched)

    # bookkeeping -------------------------------------------------------
    def observe(self, state: TaskState, x, y: float, f: float = math.nan) -> None:
        """Record an evaluation and refresh beta, information gain and the gap."""
        gamma_prev = state.gamma
        record_eval(state, x, y, f)
        s = state.local_counter
        data = self.dataset(state)
        kernel = self._kernel(state)
        M = kernel(data.inputs, data.inputs) / data.noise_lambda
        M[np.diag_indices_from(M)] += 1.0
        try:
            L, _ = stable_cholesky(M)
            gamma = float(np.log(np.diag(L)).sum())
        except IllConditionedError:
            gamma = gamma_prev
        state.gamma = max(gamma, 0.0)
        state.beta = self._beta(s, gamma_prev, state.index)
        _, _, sd = self._standardized(state)
        state.y_scale = sd
        state.psi = state.beta * state.gamma * sd * sd
        cfg = self.config
        if cfg.gap_mode == "surrogate":
            state.eps_f = opt_gap(s, 0.0, 0.0, cfg.noise_lambda, mode="surrogate", eps0=cfg.eps0)
        else:
            state.eps_f = sd * opt_gap(s, state.beta, state.gamma, cfg.noise_lambda)

    def step(self, state: TaskState, objective, rng: np.random.Generator):
        """Propose, evaluate and record one design; returns (x, y, f)."""
        x = self.propose(state, rng)
        y, f = objective(state.spec, x, rng)
        self.observe(state, x, y, f)
        return x, y, f
