"""Long-run value envelopes built from utility intervals plus gap headroom."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .utility import UtilityInterval

SCHEDULES = ("dense", "geometric")


@dataclass(frozen=True)
class Checkpoint:
    step: int
    interval: UtilityInterval
    incumbent: float


@dataclass(frozen=True)
class ValueEnvelope:
    lower: float = 0.0
    upper: float = 1.0
    bounded: bool = True

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"empty envelope [{self.lower}, {self.upper}]")
        if self.bounded and not (0.0 <= self.lower and self.upper <= 1.0):
            raise ValueError("bounded envelope leaves [0, 1]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol


INITIAL_ENVELOPE = ValueEnvelope(0.0, 1.0)
UNBOUNDED_ENVELOPE = ValueEnvelope(-math.inf, math.inf, bounded=False)


@dataclass(frozen=True)
class EnvelopeConfig:
    lipschitz: float = 1.0
    c_u: float = 1.0
    schedule: str = "dense"
    intersect: bool = False

    def __post_init__(self):
        if not self.lipschitz > 0.0 or not self.c_u > 0.0:
            raise ValueError("lipschitz and c_u must be positive")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown checkpoint schedule {self.schedule!r}")


def envelope_constant(c_u: float, schedule: str = "dense") -> float:
    if schedule == "dense":
        return c_u + 1.0
    if schedule == "geometric":
        return math.sqrt(2.0) * (c_u + 1.0) + 1.0
    raise ValueError(f"unknown checkpoint schedule {schedule!r}")


def checkpoint_due(s: int, schedule: str = "dense") -> bool:
    if schedule == "dense":
        return s >= 1
    return s >= 1 and (s & (s - 1)) == 0


def propagate(checkpoint: Checkpoint, incumbent: float, lipschitz: float) -> UtilityInterval:
    iv = checkpoint.interval
    upper = iv.upper + lipschitz * (incumbent - checkpoint.incumbent)
    if iv.bounded:
        upper = min(1.0, upper)
    return UtilityInterval(iv.lower, max(upper, iv.lower), iv.source)


def update_envelope(interval: UtilityInterval, eps_f: float, lipschitz: float) -> ValueEnvelope:
    upper = interval.upper + lipschitz * eps_f
    if interval.bounded:
        return ValueEnvelope(min(max(interval.lower, 0.0), 1.0), min(max(upper, 0.0), 1.0))
    return ValueEnvelope(interval.lower, upper, bounded=False)


def merge_checkpoint(
    fresh: UtilityInterval, propagated: UtilityInterval | None, intersect: bool
) -> UtilityInterval:
    """Interval stored at a new checkpoint (fresh one unless intersecting)."""
    if not intersect or propagated is None:
        return fresh
    lo, hi = max(fresh.lower, propagated.lower), min(fresh.upper, propagated.upper)
    if lo > hi:  # disjoint means one of them failed; trust the fresh draw
        return fresh
    return UtilityInterval(lo, hi, fresh.source)


def width_bound_check(
    env: ValueEnvelope, eps_f: float, c_u: float, lipschitz: float, schedule: str = "dense",
    tol: float = 1e-12,
) -> bool:
    return env.width <= envelope_constant(c_u, schedule) * lipschitz * eps_f + tol


def advance(state, feedback, cfg: EnvelopeConfig) -> None:
    """Refresh a task's utility interval and envelope after it was evaluated.

    ``feedback`` is the oracle answer for this step or ``None`` when the
    schedule skips the query; the state is updated in place.
    """
    s = state.local_counter
    propagated = None
    if state.checkpoint is not None:
        propagated = propagate(state.checkpoint, state.incumbent, cfg.lipschitz)
    if feedback is not None:
        iv = merge_checkpoint(feedback.interval, propagated, cfg.intersect)
        state.checkpoint = Checkpoint(s, iv, state.incumbent)
    elif propagated is not None:
        iv = propagated
    else:
        return
    state.interval = iv
    state.envelope = update_envelope(iv, state.eps_f, cfg.lipschitz)
