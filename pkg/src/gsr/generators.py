"""Programmatic task generators: coarse-to-fine mutation and domain doubling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .tasks import (
    NOISE_KEYS,
    SPEC_KEYS,
    SpecError,
    TaskRegistry,
    TaskSchema,
    TaskSpec,
    field_changed,
    task_distance,
)


@dataclass(frozen=True)
class MutationSchedule:
    rho0: float = 0.5
    step_weight0: float = 0.3
    step_target0: float = 0.25
    shrink0: float = 0.5
    jitter0: float = 0.1
    min_span_frac: float = 0.15

    def __post_init__(self):
        if not 0.0 < self.rho0 <= 1.0:
            raise ValueError("rho0 must lie in (0, 1]")
        if not 0.0 < self.min_span_frac < 1.0:
            raise ValueError("min_span_frac must lie in (0, 1)")

    def rho(self, m: int) -> float:
        return self.rho0 * 2.0**-m

    def step_weight(self, m: int) -> float:
        return self.step_weight0 * 2.0**-m

    def step_target(self, m: int) -> float:
        return self.step_target0 * 2.0**-m

    def shrink(self, m: int) -> float:
        """Width multiplier applied by a domain edit at level ``m``."""
        return 1.0 - self.shrink0 * 2.0**-m

    def n_edits(self, m: int, n_fields: int) -> int:
        """Rounded ``rho(m) * n_fields``, but never below one edit."""
        return max(1, int(math.floor(self.rho(m) * n_fields + 0.5)))


@dataclass(frozen=True)
class ExpansionConfig:
    rho_expand: float = 2.0
    max_expansions: int = 10
    min_span_frac: float = 0.15
    clip_box: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if not self.rho_expand > 1.0:
            raise ValueError("rho_expand must exceed 1")
        if not 0.0 < self.min_span_frac < 1.0:
            raise ValueError("min_span_frac must lie in (0, 1)")


@dataclass
class GenResult:
    accepted: list[TaskSpec] = field(default_factory=list)
    rejected: list[tuple[TaskSpec | None, str]] = field(default_factory=list)
    proposals: int = 0


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-and-threshold)."""
    v = np.asarray(v, float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    w = np.maximum(v - css[rho] / (rho + 1.0), 0.0)
    return w / w.sum()


def validate(spec, schema: TaskSchema | None = None, min_span_frac: float | None = None) -> list[str]:
    """List every schema violation of a spec object or raw spec mapping."""
    if isinstance(spec, TaskSpec):
        doc = dict(
            task_id=spec.task_id, parent_id=spec.parent_id, level_m=spec.level_m,
            bounds=[list(b) for b in spec.bounds], objective_params=dict(spec.objective_params),
            notes=spec.notes,
        )
    elif isinstance(spec, Mapping):
        doc = dict(spec)
    else:
        return ["spec must be a TaskSpec or a mapping"]
    out = [f"missing key {k}" for k in SPEC_KEYS if k not in doc]
    if out:
        return out
    if not isinstance(doc["task_id"], str) or not doc["task_id"]:
        out.append("task_id must be a nonempty string")
    if not isinstance(doc["level_m"], int) or doc["level_m"] < 0:
        out.append("level_m must be a nonnegative integer")
    bounds = doc["bounds"]
    if not isinstance(bounds, (list, tuple)) or not bounds:
        return out + ["bounds must be a nonempty list"]
    if "dim" in doc and doc["dim"] != len(bounds):
        out.append(f"dim {doc['dim']} does not match {len(bounds)} bounds")
    for k, b in enumerate(bounds):
        if not isinstance(b, (list, tuple)) or len(b) != 2:
            out.append(f"malformed bound dim {k}")
            continue
        lo, hi = b
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in (lo, hi)):
            out.append(f"non-finite bound dim {k}")
        elif lo >= hi:
            out.append(f"degenerate bound dim {k}")
    params = doc["objective_params"]
    if not isinstance(params, Mapping):
        return out + ["objective_params must be a map"]
    for key, value in params.items():
        vals = value if isinstance(value, (list, tuple)) else [value]
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            out.append(f"field {key} is not numeric")
    for key in NOISE_KEYS:
        if key in params and isinstance(params[key], (int, float)) and params[key] < 0:
            out.append(f"negative noise {key}")
    if out or schema is None:
        return out
    for f in schema.fields:
        if f.name not in params:
            out.append(f"missing field {f.name}")
            continue
        value = params[f.name]
        if f.kind == "simplex":
            v = np.asarray(value, float)
            if np.any(v < -1e-12) or abs(v.sum() - 1.0) > 1e-9:
                out.append(f"simplex field {f.name} sums to {v.sum():.6g}")
        elif f.kind != "fixed" and not f.lower - 1e-12 <= value <= f.upper + 1e-12:
            out.append(f"field {f.name} outside [{f.lower}, {f.upper}]")
    if schema.domain_box is not None:
        if len(schema.domain_box) != len(bounds):
            out.append("dimension does not match the schema box")
            return out
        for k, ((lo, hi), (glo, ghi)) in enumerate(zip(bounds, schema.domain_box)):
            if lo < glo - 1e-12 or hi > ghi + 1e-12:
                out.append(f"bound dim {k} leaves the schema box")
            if min_span_frac is not None and hi - lo < min_span_frac * (ghi - glo) - 1e-12:
                out.append(f"bound dim {k} narrower than min span")
    return out


def dedup(
    candidates: Iterable[TaskSpec],
    existing: Iterable[TaskSpec],
    tolerance: float = 1e-3,
    schema: TaskSchema | None = None,
) -> list[TaskSpec]:
    kept: list[TaskSpec] = []
    pool = list(existing)
    for cand in candidates:
        if any(_close(cand, other, tolerance, schema) for other in pool + kept):
            continue
        kept.append(cand)
    return kept


def _close(a: TaskSpec, b: TaskSpec, tolerance: float, schema) -> bool:
    try:
        return task_distance(a, b, schema) <= tolerance
    except SpecError:
        return False


def _edit_scalar(value, lo, hi, step, rng) -> float:
    for _ in range(50):
        new = float(np.clip(value + step * (hi - lo) * rng.uniform(-1.0, 1.0), lo, hi))
        if field_changed(new, value):
            return new
    return value


def _edit_simplex(value, step, rng) -> tuple[float, ...]:
    v = np.asarray(value, float)
    for _ in range(50):
        new = project_simplex(v + step * rng.standard_normal(v.size))
        if field_changed(tuple(new), tuple(v)):
            return tuple(float(x) for x in new)
    return tuple(value)


def _edit_bounds(bounds, k, design_k, box_k, schedule: MutationSchedule, m, rng):
    lo, hi = bounds[k]
    glo, ghi = box_k if box_k is not None else (-math.inf, math.inf)
    span = (ghi - glo) if box_k is not None else (hi - lo)
    width = max((hi - lo) * schedule.shrink(m), schedule.min_span_frac * span)
    width = min(width, ghi - glo) if box_k is not None else width
    center = design_k if design_k is not None else 0.5 * (lo + hi)
    for _ in range(50):
        c = center + schedule.jitter0 * 2.0**-m * (hi - lo) * rng.uniform(-1.0, 1.0)
        new_lo, new_hi = c - 0.5 * width, c + 0.5 * width
        if new_lo < glo:
            new_lo, new_hi = glo, glo + width
        if new_hi > ghi:
            new_lo, new_hi = ghi - width, ghi
        if field_changed((new_lo, new_hi), (lo, hi)):
            return (new_lo, new_hi)
    return (lo, hi)


def mutate_once(
    anchor: TaskSpec,
    m: int,
    schedule: MutationSchedule,
    schema: TaskSchema,
    rng: np.random.Generator,
    anchor_design=None,
    task_id: str = "child",
) -> TaskSpec | None:
    """One child editing ``schedule.n_edits`` fields, or ``None`` if an edit stalls."""
    slots = [("param", f) for f in schema.editable]
    if schema.domain_editable:
        slots += [("bound", k) for k in range(anchor.dim)]
    n = schedule.n_edits(m, len(slots))
    chosen = rng.choice(len(slots), size=min(n, len(slots)), replace=False) if n else []
    params = dict(anchor.objective_params)
    bounds = list(anchor.bounds)
    for j in sorted(int(c) for c in chosen):
        kind, item = slots[j]
        if kind == "param":
            old = params[item.name]
            if item.kind == "simplex":
                new = _edit_simplex(old, schedule.step_weight(m), rng)
            else:
                step = schedule.step_weight(m) if item.kind == "weight" else schedule.step_target(m)
                new = _edit_scalar(old, item.lower, item.upper, step, rng)
            if not field_changed(new, old):
                return None
            params[item.name] = new
        else:
            box_k = schema.domain_box[item] if schema.domain_box is not None else None
            design_k = None if anchor_design is None else float(np.asarray(anchor_design)[item])
            new_b = _edit_bounds(bounds, item, design_k, box_k, schedule, m, rng)
            if not field_changed(new_b, bounds[item]):
                return None
            bounds[item] = new_b
    return TaskSpec(task_id, tuple(bounds), params, anchor.task_id, m, anchor.notes)


def gen_mutations(
    anchor: TaskSpec,
    m: int,
    J: int,
    schedule: MutationSchedule,
    rng: np.random.Generator,
    schema: TaskSchema | None = None,
    existing: Sequence[TaskSpec] = (),
    anchor_design=None,
    new_id: Callable[[int], str] | None = None,
    tolerance: float = 1e-3,
) -> GenResult:
    """Mutation batch of up to ``J`` validated, deduplicated children."""
    if J < 1:
        raise ValueError("J must be >= 1")
    schema = TaskSchema.infer(anchor) if schema is None else schema
    new_id = new_id or (lambda j: f"{anchor.task_id}.m{m}.{j}")
    pool = [anchor, *existing]
    res = GenResult()
    for _ in range(10 * J):
        if len(res.accepted) >= J:
            break
        res.proposals += 1
        child = mutate_once(anchor, m, schedule, schema, rng, anchor_design, new_id(len(res.accepted)))
        if child is None:
            res.rejected.append((None, "edit produced no change"))
            continue
        problems = validate(child, schema, schedule.min_span_frac if schema.domain_box else None)
        if problems:
            res.rejected.append((child, "; ".join(problems)))
            continue
        if not dedup([child], pool + res.accepted, tolerance, schema):
            res.rejected.append((child, "duplicate"))
            continue
        res.accepted.append(child)
    return res


def gen_domain_double(
    anchor: TaskSpec, config: ExpansionConfig, anchor_design=None, task_id: str | None = None
) -> TaskSpec:
    """Box of ``rho`` times the width, centered on the anchor's incumbent design."""
    done = int(anchor.objective_params.get("expansions", 0))
    if done >= config.max_expansions:
        raise ValueError(f"expansion cap {config.max_expansions} reached")
    lo, hi = anchor.lower, anchor.upper
    center = 0.5 * (lo + hi) if anchor_design is None else np.asarray(anchor_design, float)
    half = 0.5 * config.rho_expand * (hi - lo)
    new_lo, new_hi = center - half, center + half
    if config.clip_box is not None:
        box = np.asarray(config.clip_box, float)
        new_lo = np.maximum(new_lo, box[:, 0])
        new_hi = np.minimum(new_hi, box[:, 1])
    params = dict(anchor.objective_params)
    params["expansions"] = float(done + 1)
    return TaskSpec(
        task_id or f"{anchor.task_id}+",
        tuple(zip(new_lo.tolist(), new_hi.tolist())),
        params,
        anchor.task_id,
        anchor.level_m + 1,
        anchor.notes,
    )


class MutationGenerator:
    def __init__(self, schema: TaskSchema | None = None, schedule: MutationSchedule = MutationSchedule(),
                 tolerance: float = 1e-3):
        self.schema = schema
        self.schedule = schedule
        self.tolerance = tolerance

    def __call__(self, anchor_state, m, J, rng, registry: TaskRegistry, new_id) -> GenResult:
        return gen_mutations(
            anchor_state.spec, m, J, self.schedule, rng, self.schema, registry.specs(),
            anchor_state.incumbent_x, new_id, self.tolerance,
        )


class DomainDoublingGenerator:
    """Emits a single doubled box around the anchor's incumbent design; each box is expanded once."""

    def __init__(self, config: ExpansionConfig = ExpansionConfig()):
        self.config = config

    def __call__(self, anchor_state, m, J, rng, registry: TaskRegistry, new_id) -> GenResult:
        res = GenResult(proposals=1)
        try:
            child = gen_domain_double(anchor_state.spec, self.config, anchor_state.incumbent_x, new_id(0))
        except ValueError as exc:
            res.rejected.append((None, str(exc)))
            return res
        child = child.derive(level_m=m)
        if any(s.parent_id == anchor_state.spec.task_id for s in registry.specs()):
            res.rejected.append((child, "anchor already expanded"))
        elif any(s.bounds == child.bounds for s in registry.specs()):
            res.rejected.append((child, "duplicate"))
        else:
            res.accepted.append(child)
        return res


def estimate_delta_plus(
    anchor: TaskSpec,
    m: int,
    J: int,
    probe_budget: int,
    eps_u: float,
    seeds: Iterable[int],
    propose: Callable[[TaskSpec, int, int, np.random.Generator], list[TaskSpec]],
    score: Callable[[TaskSpec, int, np.random.Generator], float],
) -> float:
    """Fraction of generated children scoring within ``eps_u`` of their batch best.

    ``propose(anchor, m, J, rng)`` returns a batch; ``score(spec, budget, rng)``
    runs a short probe and reports the final best-so-far utility.
    """
    if probe_budget < 1:
        raise ValueError("probe_budget must be >= 1")
    hits = total = 0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        batch = propose(anchor, m, J, rng)
        if not batch:
            continue
        anchor_score = score(anchor, probe_budget, rng)
        scores = [score(child, probe_budget, rng) for child in batch]
        best = max([anchor_score, *scores])
        hits += sum(best - sc <= eps_u for sc in scores)
        total += len(scores)
    return hits / total if total else 0.0


def batch_failure_bound(delta_plus: float, J: int) -> float:
    return (1.0 - delta_plus) ** J
