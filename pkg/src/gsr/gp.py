"""Exact Gaussian-process regression and GP-UCB machinery.

Everything here works in whatever input coordinates the caller supplies.
The per-task optimizer in :mod:`gsr.engine` maps each task box onto the unit
cube before calling in, so a lengthscale of 0.2 means 20% of the box width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr

KERNEL_FAMILIES = ("rbf", "matern52")
JITTER_START = 1e-10
JITTER_MAX = 1e-4

DEFAULT_LENGTHSCALE_GRID = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4)
DEFAULT_OUTPUT_SCALE_GRID = (0.25, 0.5, 1.0, 2.0)


class IllConditionedError(np.linalg.LinAlgError):
    """Raised when Cholesky fails even after the maximum jitter."""


@dataclass(frozen=True)
class KernelSpec:
    """Stationary kernel with per-dimension lengthscales.

    ``output_scale`` is the signal variance, so ``k(x, x) == output_scale``.
    """

    family: str = "matern52"
    lengthscales: tuple[float, ...] = (0.2,)
    output_scale: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if not ls or min(ls) <= 0.0:
            raise ValueError("lengthscales must be strictly positive")
        if not self.output_scale > 0.0:
            raise ValueError("output_scale must be strictly positive")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "output_scale", float(self.output_scale))

    @classmethod
    def default(cls, dim: int, family: str = "matern52") -> "KernelSpec":
        return cls(family, (0.2,) * dim, 1.0)

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def _scaled_dist(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        ls = np.asarray(self.lengthscales)
        A = np.atleast_2d(A) / ls
        B = np.atleast_2d(B) / ls
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.maximum(sq, 0.0)

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        sq = self._scaled_dist(A, B)
        if self.family == "rbf":
            return self.output_scale * np.exp(-0.5 * sq)
        r5 = np.sqrt(5.0 * sq)
        return self.output_scale * (1.0 + r5 + 5.0 * sq / 3.0) * np.exp(-r5)

    def diag(self, A: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(A).shape[0], self.output_scale)


def kernel_grid(
    dim: int,
    family: str = "matern52",
    lengthscales: Sequence[float] = DEFAULT_LENGTHSCALE_GRID,
    output_scales: Sequence[float] = DEFAULT_OUTPUT_SCALE_GRID,
) -> list[KernelSpec]:
    """Isotropic candidate grid, ordered by lengthscale then output scale."""
    return [
        KernelSpec(family, (ls,) * dim, os)
        for ls in sorted(lengthscales)
        for os in output_scales
    ]


@dataclass(frozen=True)
class GpDataset:
    inputs: np.ndarray
    outputs: np.ndarray
    noise_lambda: float = 1e-4

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.outputs, dtype=float).reshape(-1)
        if X.size == 0:
            X = X.reshape(0, X.shape[1] if X.ndim == 2 else 0)
        if X.shape[0] != y.shape[0]:
            raise ValueError("inputs and outputs must have the same length")
        if not self.noise_lambda > 0.0:
            raise ValueError("noise_lambda must be positive")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", y)

    def __len__(self) -> int:
        return self.outputs.shape[0]

    def append(self, x, y: float) -> "GpDataset":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        X = x if len(self) == 0 else np.vstack([self.inputs, x])
        return GpDataset(X, np.append(self.outputs, float(y)), self.noise_lambda)


def stable_cholesky(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky with jitter escalation; returns (lower factor, jitter used)."""
    try:
        return np.linalg.cholesky(M), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(M.shape[0])
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(M + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise IllConditionedError("Cholesky failed after maximum jitter")


@dataclass(frozen=True)
class GpPosterior:
    kernel: KernelSpec
    dataset: GpDataset
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    @classmethod
    def prior(cls, kernel: KernelSpec, noise_lambda: float = 1e-4) -> "GpPosterior":
        empty = GpDataset(np.zeros((0, kernel.dim)), np.zeros(0), noise_lambda)
        return cls(kernel, empty, np.zeros((0, 0)), np.zeros(0))

    def predict(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance (clamped at zero) at the rows of ``X``."""
        X = np.atleast_2d(X)
        prior_var = self.kernel.diag(X)
        if len(self.dataset) == 0:
            return np.zeros(X.shape[0]), prior_var
        Ks = self.kernel(X, self.dataset.inputs)
        mean = Ks @ self.alpha
        V = solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
        var = prior_var - (V * V).sum(0)
        return mean, np.maximum(var, 0.0)


def fit_posterior(dataset: GpDataset, kernel: KernelSpec) -> GpPosterior:
    if len(dataset) == 0:
        raise ValueError("cannot condition on an empty dataset; use GpPosterior.prior")
    K = kernel(dataset.inputs, dataset.inputs)
    K[np.diag_indices_from(K)] += dataset.noise_lambda
    L, jitter = stable_cholesky(K)
    alpha = cho_solve((L, True), dataset.outputs, check_finite=False)
    return GpPosterior(kernel, dataset, L, alpha, jitter)


def log_marginal_likelihood(dataset: GpDataset, kernel: KernelSpec) -> float:
    post = fit_posterior(dataset, kernel)
    n = len(dataset)
    return float(
        -0.5 * dataset.outputs @ post.alpha
        - np.log(np.diag(post.chol)).sum()
        - 0.5 * n * math.log(2.0 * math.pi)
    )


def info_gain(dataset: GpDataset, kernel: KernelSpec) -> float:
    """Empirical information gain ``0.5 * log det(I + K / lambda)``."""
    n = len(dataset)
    if n == 0:
        return 0.0
    M = kernel(dataset.inputs, dataset.inputs) / dataset.noise_lambda
    M[np.diag_indices_from(M)] += 1.0
    L, _ = stable_cholesky(M)
    return float(np.log(np.diag(L)).sum())


def fit_hyperparameters(
    dataset: GpDataset,
    grid: Sequence[KernelSpec],
    previous: KernelSpec | None = None,
) -> KernelSpec:
    """Grid search for the kernel maximizing the exact log marginal likelihood.

    Ties (relative 1e-12) go to the larger lengthscale. If every candidate is
    ill-conditioned the previous spec is returned unchanged.
    """
    if len(dataset) < 2:
        raise ValueError("hyperparameter fitting needs at least two points")
    best, best_lml = None, -np.inf
    for cand in grid:
        try:
            lml = log_marginal_likelihood(dataset, cand)
        except IllConditionedError:
            continue
        if not np.isfinite(lml):
            continue
        tol = 1e-12 * max(1.0, abs(best_lml)) if np.isfinite(best_lml) else 0.0
        if lml > best_lml + tol:
            best, best_lml = cand, lml
        elif abs(lml - best_lml) <= tol and max(cand.lengthscales) > max(best.lengthscales):
            best, best_lml = cand, max(lml, best_lml)
    if best is None:
        if previous is None:
            raise IllConditionedError("no grid candidate could be factorized")
        return previous
    return best


ARD_LENGTHSCALE_BOUNDS = (0.01, 20.0)
ARD_OUTPUT_SCALE_BOUNDS = (0.05, 20.0)


def _lml_and_grad(theta: np.ndarray, dataset: GpDataset, family: str) -> tuple[float, np.ndarray]:
    """Negative log marginal likelihood and its gradient in log-parameters."""
    ls = np.exp(theta[:-1])
    amp = math.exp(theta[-1])
    X, y = dataset.inputs, dataset.outputs
    diff2 = ((X[:, None, :] - X[None, :, :]) / ls) ** 2
    sq = diff2.sum(-1)
    if family == "rbf":
        base = np.exp(-0.5 * sq)
        shape = base
    else:
        r5 = np.sqrt(5.0 * sq)
        e = np.exp(-r5)
        base = (1.0 + r5 + 5.0 * sq / 3.0) * e
        shape = (5.0 / 3.0) * (1.0 + r5) * e
    K = amp * base
    K[np.diag_indices_from(K)] += dataset.noise_lambda
    L, _ = stable_cholesky(K)
    alpha = cho_solve((L, True), y, check_finite=False)
    nll = 0.5 * y @ alpha + np.log(np.diag(L)).sum() + 0.5 * len(y) * math.log(2.0 * math.pi)
    W = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(len(y)), check_finite=False)
    grad = np.empty_like(theta)
    for k in range(ls.size):
        grad[k] = -0.5 * np.sum(W * (amp * shape * diff2[:, :, k]))
    grad[-1] = -0.5 * np.sum(W * (amp * base))
    return float(nll), grad


def refine_ard(dataset: GpDataset, start: KernelSpec, max_iter: int = 50) -> KernelSpec:
    """Local L-BFGS-B ascent of the marginal likelihood over per-dimension lengthscales.

    Starts from ``start`` (typically the grid winner) and falls back to it
    whenever the optimizer fails or ends at a worse likelihood.
    """
    theta0 = np.log(np.r_[start.lengthscales, start.output_scale])
    bounds = [tuple(np.log(ARD_LENGTHSCALE_BOUNDS))] * start.dim + [tuple(np.log(ARD_OUTPUT_SCALE_BOUNDS))]
    theta0 = np.clip(theta0, [b[0] for b in bounds], [b[1] for b in bounds])

    def objective(theta):
        try:
            return _lml_and_grad(theta, dataset, start.family)
        except IllConditionedError:
            return 1e300, np.zeros_like(theta)

    try:
        res = minimize(objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": max_iter})
    except (ValueError, np.linalg.LinAlgError):
        return start
    start_nll, _ = objective(theta0)
    if not np.isfinite(res.fun) or res.fun > start_nll:
        return start
    return KernelSpec(start.family, tuple(np.exp(res.x[:-1])), float(np.exp(res.x[-1])))


@dataclass(frozen=True)
class UcbSchedule:
    rkhs_bound: float = 1.0
    noise_proxy: float = 0.1
    delta_f_task: float = 0.05
    mode: str = "fixed_beta"
    fixed_value: float = 4.0

    def __post_init__(self):
        if not 0.0 < self.delta_f_task < 1.0:
            raise ValueError("delta_f_task must lie in (0, 1)")
        if self.mode not in ("theoretical", "fixed_beta"):
            raise ValueError(f"unknown beta mode {self.mode!r}")
        if self.mode == "fixed_beta" and not self.fixed_value > 0.0:
            raise ValueError("fixed beta must be positive")
        if self.rkhs_bound <= 0.0 or self.noise_proxy <= 0.0:
            raise ValueError("rkhs_bound and noise_proxy must be positive")


def beta(s: int, gamma_prev: float, schedule: UcbSchedule) -> float:
    if s < 1:
        raise ValueError("local step must be >= 1")
    if schedule.mode == "fixed_beta":
        return float(schedule.fixed_value)
    root = schedule.rkhs_bound + schedule.noise_proxy * math.sqrt(
        2.0 * (gamma_prev + 1.0 + math.log(1.0 / schedule.delta_f_task))
    )
    return root * root


def c_lambda(lam: float) -> float:
    return 2.0 / math.log1p(1.0 / lam)


def opt_gap(
    s: int,
    beta_s: float,
    gamma: float,
    lam: float,
    *,
    mode: str = "theoretical",
    eps0: float = 1.0,
) -> float:
    """Optimization-gap bound after ``s`` local steps.

    ``mode="surrogate"`` ignores beta/gamma and returns ``eps0 / sqrt(s)``.
    """
    if s < 1:
        raise ValueError("local step must be >= 1")
    if mode == "surrogate":
        return eps0 / math.sqrt(s)
    return 2.0 * math.sqrt(c_lambda(lam) * beta_s * gamma / s)


def per_task_delta(task_index: int, delta_f: float) -> float:
    if task_index < 1:
        raise ValueError("task_index starts at 1")
    return delta_f / (math.pi**2 * task_index**2)


@dataclass(frozen=True)
class SearchBudget:
    raw_samples: int = 512
    restarts: int = 10
    steps: int = 50
    step_start: float = 0.25
    step_end: float = 1e-4


def maximize_acquisition(
    acq: Callable[[np.ndarray], np.ndarray],
    lower: np.ndarray,
    upper: np.ndarray,
    budget: SearchBudget,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """Uniform raw sampling, then compass-search refinement of the best starts."""
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    if np.any(upper <= lower):
        raise ValueError("degenerate search box")
    d = lower.size
    width = upper - lower
    raw = lower + rng.random((budget.raw_samples, d)) * width
    vals = acq(raw)
    n_starts = min(budget.restarts, raw.shape[0])
    order = np.argsort(-vals, kind="stable")[:n_starts]
    pts, best = raw[order].copy(), vals[order].copy()
    if budget.steps > 0 and n_starts > 0:
        steps = np.geomspace(budget.step_start, budget.step_end, budget.steps)
        offsets = np.vstack([np.eye(d), -np.eye(d)])
        for h in steps:
            probes = pts[:, None, :] + h * offsets[None, :, :] * width
            probes = np.clip(probes, lower, upper).reshape(-1, d)
            pv = acq(probes).reshape(n_starts, 2 * d)
            j = pv.argmax(1)
            gain = pv[np.arange(n_starts), j] > best
            if gain.any():
                moved = probes.reshape(n_starts, 2 * d, d)[np.arange(n_starts), j]
                pts[gain] = moved[gain]
                best[gain] = pv[np.arange(n_starts), j][gain]
    k = int(np.argmax(best))
    return pts[k].copy(), float(best[k])


def ucb_values(posterior: GpPosterior, beta_s: float, X: np.ndarray) -> np.ndarray:
    mean, var = posterior.predict(X)
    return mean + math.sqrt(beta_s) * np.sqrt(var)


def ucb_select(
    posterior: GpPosterior,
    beta_s: float,
    lower,
    upper,
    budget: SearchBudget = SearchBudget(),
    rng: np.random.Generator | None = None,
    candidates: np.ndarray | None = None,
) -> np.ndarray:
    """Maximize ``mu + sqrt(beta) * sigma`` over a box or a finite candidate set."""
    if candidates is not None:
        C = np.atleast_2d(np.asarray(candidates, float))
        return C[int(np.argmax(ucb_values(posterior, beta_s, C)))].copy()
    rng = np.random.default_rng(0) if rng is None else rng
    x, _ = maximize_acquisition(
        lambda X: ucb_values(posterior, beta_s, X), lower, upper, budget, rng
    )
    return x


def expected_improvement(posterior: GpPosterior, best: float, X: np.ndarray) -> np.ndarray:
    mean, var = posterior.predict(X)
    sd = np.sqrt(var)
    imp = mean - best
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, imp / np.where(sd > 0, sd, 1.0), 0.0)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return np.where(sd > 0, imp * ndtr(z) + sd * pdf, np.maximum(imp, 0.0))
