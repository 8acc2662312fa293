"""Utility feedback: Gaussian-CDF utilities, simulated Bradley-Terry committees,
Hoeffding intervals on win rates and log-odds transport through an anchor."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy.special import expit, logit as _logit

from .gp import c_lambda

SOURCES = ("direct", "transported", "initial", "objective")
SIZING_MODES = ("fixed", "width_targeted", "epsf_targeted")


@dataclass(frozen=True)
class UtilityInterval:
    lower: float
    upper: float
    source: str = "direct"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown interval source {self.source!r}")
        lo, hi = float(self.lower), float(self.upper)
        if not lo <= hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        if self.bounded and not (0.0 <= lo and hi <= 1.0):
            raise ValueError(f"utility interval [{lo}, {hi}] leaves [0, 1]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def bounded(self) -> bool:
        # "objective" intervals rank tasks by raw objective values
        return self.source != "objective"

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def logit_width(self) -> float:
        return float(logit(self.upper) - logit(self.lower))

    def contains(self, u: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= u <= self.upper + tol


INITIAL_INTERVAL = UtilityInterval(0.0, 1.0, "initial")
REFERENCE_INTERVAL = UtilityInterval(0.5, 0.5, "initial")


def sigmoid(x):
    return expit(x)


def logit(p):
    return _logit(p)


def std_normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class CdfUtilityParams:
    mu: float
    sigma: float
    sigma_floor: float = 1e-9

    def __post_init__(self):
        if not self.sigma_floor > 0.0:
            raise ValueError("sigma_floor must be positive")
        if self.sigma < self.sigma_floor:
            raise ValueError("sigma below its floor")


def direct_utility_cdf(z: float, params: CdfUtilityParams) -> float:
    return std_normal_cdf((z - params.mu) / params.sigma)


def calibrate_cdf(
    objective: Callable[[np.ndarray], np.ndarray],
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    S: int = 20000,
    rng: np.random.Generator | None = None,
    sigma_floor: float = 1e-9,
) -> CdfUtilityParams:
    """Monte Carlo mean and standard deviation of the objective over its domain.

    ``objective`` maps an (S, d) array to S values; ``sampler(rng, S)`` draws
    the uniform design.
    """
    if S < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(0) if rng is None else rng
    vals = np.asarray(objective(sampler(rng, S)), float)
    sd = float(vals.std(ddof=1))
    return CdfUtilityParams(float(vals.mean()), max(sd, sigma_floor), sigma_floor)


def call_delta(t: int, delta_u: float) -> float:
    if t < 1:
        raise ValueError("call index starts at 1")
    return delta_u / (math.pi**2 * t * t)


def utility_ci_direct(u_tilde: float, t: int, sigma_u2: float, delta_u: float) -> UtilityInterval:
    phi = math.sqrt(2.0 * sigma_u2 * math.log(2.0 / call_delta(t, delta_u)))
    lo = min(max(u_tilde - phi, 0.0), 1.0)
    hi = min(max(u_tilde + phi, 0.0), 1.0)
    return UtilityInterval(lo, hi, "direct")


def hoeffding_radius(K: int, delta: float) -> float:
    return math.sqrt(math.log(2.0 / delta) / (2.0 * K))


def hoeffding_p_interval(k: int, K: int, delta: float) -> tuple[float, float]:
    if not 0 <= k <= K or K < 1:
        raise ValueError("need 0 <= k <= K and K >= 1")
    p_hat = k / K
    r = hoeffding_radius(K, delta)
    return max(p_hat - r, 0.0), min(p_hat + r, 1.0)


def _transport_endpoint(anchor_end: float, p: float, eps_clip: float, lower: bool) -> float:
    # Infinite log-odds on either side decide the endpoint outright; when they
    # conflict the conservative value wins (0 for lower ends, 1 for upper ends).
    if lower:
        if p <= eps_clip or anchor_end <= 0.0:
            return 0.0
        if p >= 1.0 - eps_clip or anchor_end >= 1.0:
            return 1.0
    else:
        if p >= 1.0 - eps_clip or anchor_end >= 1.0:
            return 1.0
        if p <= eps_clip or anchor_end <= 0.0:
            return 0.0
    return float(sigmoid(logit(anchor_end) + logit(p)))


def transport_interval(
    anchor: UtilityInterval, p_lower: float, p_upper: float, eps_clip: float = 1e-12
) -> UtilityInterval:
    """Carry a win-rate interval through the anchor's utility interval in log-odds."""
    lo = _transport_endpoint(anchor.lower, p_lower, eps_clip, lower=True)
    hi = _transport_endpoint(anchor.upper, p_upper, eps_clip, lower=False)
    return UtilityInterval(lo, max(lo, hi), "transported")


def committee_size_explicit(eta: float, w_a: float, kappa: float, delta: float) -> int | None:
    """Votes guaranteeing transported half-width ``eta``; ``None`` if infeasible."""
    if not eta > 0.0:
        raise ValueError("eta must be positive")
    if w_a >= 8.0 * eta:
        return None
    log_term = math.log(2.0 / delta)
    need = max(
        8.0 * log_term / kappa**2,
        32.0 * log_term / (kappa**2 * (8.0 * eta - w_a) ** 2),
    )
    return max(1, math.ceil(need))


def committee_size_epsf(
    s: int, c_u: float, L_bar: float, beta_s: float, gamma: float, lam: float, delta: float
) -> int:
    if s < 1:
        raise ValueError("local step must be >= 1")
    denom = 2.0 * c_u**2 * c_lambda(lam) * L_bar**2 * beta_s * gamma
    if denom <= 0.0:
        raise ValueError("need positive beta * gamma")
    return max(1, math.ceil(s * math.log(2.0 / delta) / denom))


def votes_for_width(width: float, delta: float) -> int:
    """Smallest K whose two-sided Hoeffding interval has width at most ``width``."""
    if not width > 0.0:
        raise ValueError("width must be positive")
    return max(1, math.ceil(2.0 * math.log(2.0 / delta) / width**2))


@dataclass(frozen=True)
class Candidate:
    """A (task, incumbent value) pair shown to the committee."""

    task: Any
    value: float


class BtWorld:
    """Latent Bradley-Terry scores; ``candidate=None`` is the reference with score 0."""

    def __init__(self, score: Callable[[Any, float], float]):
        self._score = score

    def theta(self, cand: Candidate | None) -> float:
        if cand is None:
            return 0.0
        return float(self._score(cand.task, cand.value))

    def win_prob(self, cand: Candidate | None, anchor: Candidate | None) -> float:
        return float(sigmoid(self.theta(cand) - self.theta(anchor)))

    def utility(self, task, value: float) -> float:
        return self.win_prob(Candidate(task, value), None)


def simulate_votes(
    world: BtWorld, cand: Candidate | None, anchor: Candidate | None, K: int, rng: np.random.Generator
) -> int:
    if K < 1:
        raise ValueError("need at least one vote")
    return int(rng.binomial(K, world.win_prob(cand, anchor)))


@dataclass(frozen=True)
class CommitteeConfig:
    votes_per_query: int = 64
    delta_u: float = 0.05
    eps_clip: float = 1e-12
    kappa: float = 0.05
    sizing_mode: str = "fixed"
    max_votes: int = 4096
    initial_votes: int = 8
    transport: bool = True

    def __post_init__(self):
        if self.votes_per_query < 1:
            raise ValueError("votes_per_query must be >= 1")
        if not 0.0 < self.eps_clip <= 1e-3:
            raise ValueError("eps_clip must lie in (0, 1e-3]")
        if not 0.0 < self.kappa <= 0.5:
            raise ValueError("kappa must lie in (0, 0.5]")
        if not 0.0 < self.delta_u < 1.0:
            raise ValueError("delta_u must lie in (0, 1)")
        if self.sizing_mode not in SIZING_MODES:
            raise ValueError(f"unknown sizing mode {self.sizing_mode!r}")

    @property
    def sigma_u2(self) -> float:
        return 1.0 / (4.0 * self.votes_per_query)


@dataclass(frozen=True)
class QueryContext:
    """What the loop knows about the queried task when it asks for feedback."""

    s: int
    eps_f: float
    c_u: float = 1.0
    lipschitz: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    lam: float = 1.0


@dataclass(frozen=True)
class UtilityFeedback:
    interval: UtilityInterval
    u_tilde: float
    votes: int = 0
    comparator: str | None = None


class CommitteeOracle:
    """Simulated committee answering pairwise queries against an anchor or the reference.

    ``query`` compares the task's current incumbent with the anchor's incumbent
    at the anchor's last checkpoint and transports the resulting win-rate
    interval through the anchor's cached utility interval.
    """

    def __init__(self, world: BtWorld, config: CommitteeConfig = CommitteeConfig()):
        self.world = world
        self.config = config
        self.calls = 0
        self.votes_total = 0

    def _draw(self, cand, anchor_cand, K, rng):
        k = simulate_votes(self.world, cand, anchor_cand, K, rng)
        self.votes_total += K
        return k

    def query(self, state, anchor, ctx: QueryContext, rng: np.random.Generator) -> UtilityFeedback:
        cfg = self.config
        self.calls += 1
        delta = call_delta(self.calls, cfg.delta_u)
        cand = Candidate(state.spec, state.incumbent)

        anchor_iv, anchor_cand, anchor_id = REFERENCE_INTERVAL, None, None
        if (
            cfg.transport
            and cfg.sizing_mode != "epsf_targeted"
            and anchor is not None
            and anchor is not state
            and anchor.checkpoint is not None
        ):
            anchor_iv = anchor.checkpoint.interval
            anchor_cand = Candidate(anchor.spec, anchor.checkpoint.incumbent)
            anchor_id = anchor.spec.task_id

        if cfg.sizing_mode == "epsf_targeted":
            width = ctx.c_u * ctx.lipschitz * ctx.eps_f
            K = votes_for_width(width, delta)
            k = self._draw(cand, None, K, rng)
            lo, hi = hoeffding_p_interval(k, K, delta)
            iv = UtilityInterval(lo, hi, "direct")
            return UtilityFeedback(iv, k / K, K, None)

        if cfg.sizing_mode == "fixed":
            direct_half = hoeffding_radius(cfg.votes_per_query, delta)
            if anchor_cand is not None and anchor_iv.logit_width >= 8.0 * direct_half:
                anchor_iv, anchor_cand, anchor_id = REFERENCE_INTERVAL, None, None
            K = cfg.votes_per_query
            k = self._draw(cand, anchor_cand, K, rng)
            return self._finish(k, K, delta, anchor_iv, anchor_cand, anchor_id)

        # width_targeted
        eta = 0.5 * ctx.c_u * ctx.lipschitz * ctx.eps_f
        if anchor_cand is not None and anchor_iv.logit_width >= 8.0 * eta:
            anchor_iv, anchor_cand, anchor_id = REFERENCE_INTERVAL, None, None
        K = committee_size_explicit(eta, anchor_iv.logit_width, cfg.kappa, delta)
        if K is not None and K <= cfg.max_votes:
            k = self._draw(cand, anchor_cand, K, rng)
            return self._finish(k, K, delta, anchor_iv, anchor_cand, anchor_id)
        # doubling: every look spends an equal share of the call's failure budget
        looks = 1 + max(0, math.ceil(math.log2(cfg.max_votes / cfg.initial_votes)))
        delta_look = delta / looks
        K, k = cfg.initial_votes, self._draw(cand, anchor_cand, cfg.initial_votes, rng)
        while True:
            fb = self._finish(k, K, delta_look, anchor_iv, anchor_cand, anchor_id)
            if fb.interval.width <= 2.0 * eta or K >= cfg.max_votes:
                return fb
            extra = min(K, cfg.max_votes - K)
            k += self._draw(cand, anchor_cand, extra, rng)
            K += extra

    def _finish(self, k, K, delta, anchor_iv, anchor_cand, anchor_id) -> UtilityFeedback:
        p_lo, p_hi = hoeffding_p_interval(k, K, delta)
        if anchor_cand is None:
            iv = UtilityInterval(p_lo, p_hi, "direct")
            return UtilityFeedback(iv, k / K, K, None)
        iv = transport_interval(anchor_iv, p_lo, p_hi, self.config.eps_clip)
        mid = 0.5 * (anchor_iv.lower + anchor_iv.upper)
        p_hat = min(max(k / K, self.config.eps_clip), 1.0 - self.config.eps_clip)
        mid = min(max(mid, self.config.eps_clip), 1.0 - self.config.eps_clip)
        u_tilde = float(sigmoid(logit(mid) + logit(p_hat)))
        return UtilityFeedback(iv, u_tilde, K, anchor_id)


class DirectOracle:
    """Noisy scalar utility feedback ``u(z) + N(0, sigma_u2)`` with union-bounded intervals.

    ``sigma_u2 = 0`` gives exact feedback and zero-width intervals.
    """

    def __init__(self, utility: Callable[[Any, float], float], sigma_u2: float = 0.0, delta_u: float = 0.05):
        self.utility = utility
        self.sigma_u2 = float(sigma_u2)
        self.delta_u = delta_u
        self.calls = 0
        self.votes_total = 0

    def query(self, state, anchor, ctx: QueryContext, rng: np.random.Generator) -> UtilityFeedback:
        self.calls += 1
        u = self.utility(state.spec, state.incumbent)
        if self.sigma_u2 > 0.0:
            u = u + math.sqrt(self.sigma_u2) * rng.standard_normal()
        iv = utility_ci_direct(u, self.calls, self.sigma_u2, self.delta_u)
        return UtilityFeedback(iv, float(u), 0, None)


class ObjectiveOracle:
    """Ranks tasks by the raw incumbent itself (no preference model)."""

    sigma_u2 = 0.0

    def __init__(self):
        self.calls = 0
        self.votes_total = 0

    def query(self, state, anchor, ctx: QueryContext, rng: np.random.Generator) -> UtilityFeedback:
        self.calls += 1
        z = float(state.incumbent)
        return UtilityFeedback(UtilityInterval(z, z, "objective"), z, 0, None)
