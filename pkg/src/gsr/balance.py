"""Balance-and-eliminate wrapper over a geometric ladder of Lipschitz bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .core import GsrRunner, LadderState, RunLog
from .tasks import TaskRegistry

EXTRA_COLUMNS = ("rung_j", "L_j", "active_set_size", "eliminated_this_round")


def suspected_regret(n: int, L: float, gaps: Sequence[float]) -> float:
    if n < 0:
        raise ValueError("n must be >= 0")
    return L * math.fsum(gaps[:n])


def chi(t: int, sigma_u2: float, delta_be: float, M_t: int) -> float:
    if t < 1 or M_t < 1:
        raise ValueError("need t >= 1 and M_t >= 1")
    return 2.0 * sigma_u2 * math.log(4.0 * math.pi**2 * t * t * M_t / delta_be)


@dataclass
class Hypothesis:
    j: int
    L: float
    runner: GsrRunner | None = None
    n: int = 0
    u_sum: float = 0.0
    gaps: list[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return self.u_sum / self.n if self.n else 0.0

    def next_gap(self) -> float:
        return self.runner.gap_upper(self.n + 1) if self.runner is not None else 0.0

    def certificate(self, n: int | None = None) -> float:
        return suspected_regret(self.n if n is None else n, self.L, self.gaps)

    def next_certificate(self) -> float:
        return self.L * (math.fsum(self.gaps) + self.next_gap())


def balance_select(active: Sequence[Hypothesis]) -> int:
    if not active:
        raise ValueError("active set is empty")
    return min(active, key=lambda h: (h.next_certificate(), h.j)).j


def confidence_bounds(h: Hypothesis, chi_t: float) -> tuple[float, float]:
    r = math.sqrt(chi_t / h.n)
    return max(0.0, h.mean - r), min(1.0, h.mean + r)


def eliminate(active: Sequence[Hypothesis], chi_t: float) -> list[Hypothesis]:
    if any(h.n <= 0 for h in active):
        raise ValueError("every active hypothesis needs at least one play")
    bounds = {h.j: confidence_bounds(h, chi_t) for h in active}
    best_lower = max(lo for lo, _ in bounds.values())
    return [h for h in active if bounds[h.j][1] + h.certificate() / h.n >= best_lower]


def grow_ladder(
    active: list[Hypothesis],
    j_max: int,
    t: int,
    L0: float,
    g_L: Callable[[int], float],
    make: Callable[[int, float], Hypothesis] | None = None,
    max_rungs: int = 8,
) -> int:
    """Append rungs while ``L0 * 2**(j_max+1) <= L0 * g_L(t)``; returns the new j_max."""
    while j_max + 1 < max_rungs and L0 * 2.0 ** (j_max + 1) <= L0 * g_L(t):
        j_max += 1
        L = L0 * 2.0**j_max
        active.append(make(j_max, L) if make is not None else Hypothesis(j_max, L))
    return j_max


class BalanceEliminate:
    """Runs one independent GSR state per rung and charges each round to one rung.

    ``make_runner(j, L_j)`` must return a fresh :class:`GsrRunner` whose
    envelopes use ``L_j``; rungs never share tasks, data or envelopes.
    """

    def __init__(
        self,
        make_runner: Callable[[int, float], GsrRunner],
        T: int,
        L0: float = 0.5,
        g_L: Callable[[int], float] = math.sqrt,
        delta_be: float = 0.05,
        sigma_u2: float = 1.0 / 256.0,
        max_rungs: int = 8,
    ):
        self.make_runner = make_runner
        self.T = T
        self.L0 = L0
        self.g_L = g_L
        self.delta_be = delta_be
        self.sigma_u2 = sigma_u2
        self.max_rungs = max_rungs
        self.active: list[Hypothesis] = []
        self.eliminated: list[tuple[int, int]] = []
        self.rungs: dict[int, Hypothesis] = {}
        self.j_max = -1
        self.t = 0
        self.records = []
        self._grow(1)

    def _make(self, j: int, L: float) -> Hypothesis:
        h = Hypothesis(j, L, self.make_runner(j, L))
        self.rungs[j] = h
        return h

    def _grow(self, t: int) -> None:
        if self.j_max < 0:
            self.active.append(self._make(0, self.L0))
            self.j_max = 0
        self.j_max = grow_ladder(self.active, self.j_max, t, self.L0, self.g_L, self._make, self.max_rungs)

    def step(self):
        self.t += 1
        t = self.t
        j = balance_select(self.active)
        h = self.rungs[j]
        gap = h.next_gap()
        rec = h.runner.step()
        h.n += 1
        h.gaps.append(gap)
        u = rec.u_tilde if not math.isnan(rec.u_tilde) else h.mean
        h.u_sum += u
        removed: list[int] = []
        if all(a.n > 0 for a in self.active):
            M_t = 1 + max(a.j for a in self.active)
            kept = eliminate(self.active, chi(t, self.sigma_u2, self.delta_be, M_t))
            removed = [a.j for a in self.active if a not in kept]
            self.active = kept
            self.eliminated.extend((t, r) for r in removed)
        rec = replace(
            rec,
            t=t,
            event="eliminate" if removed else rec.event,
            extra={
                "rung_j": j,
                "L_j": h.L,
                "active_set_size": len(self.active),
                "eliminated_this_round": ";".join(str(r) for r in removed),
            },
        )
        self.records.append(rec)
        self._grow(t + 1)
        return rec

    def run(self) -> RunLog:
        while self.t < self.T:
            self.step()
        return self.log()

    def log(self) -> RunLog:
        registry = TaskRegistry()
        votes = sum(h.runner.oracle.votes_total for h in self.rungs.values())
        ladder = LadderState(m=max((h.runner.ladder.m for h in self.rungs.values()), default=0))
        return RunLog(self.records, registry, ladder, votes, EXTRA_COLUMNS)
