"""Task specifications, per-task state, the run registry and spec serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .envelopes import INITIAL_ENVELOPE, UNBOUNDED_ENVELOPE, Checkpoint, ValueEnvelope
from .utility import INITIAL_INTERVAL, UtilityInterval

EQUAL_RTOL = 1e-9
SPEC_KEYS = ("task_id", "parent_id", "level_m", "bounds", "objective_params", "notes")
NOISE_KEYS = ("noise", "noise_sigma", "noise_std")


class SpecError(ValueError):
    """A task spec or its text form violates the schema."""


class DegenerateDomainError(SpecError):
    pass


def _freeze_param(value):
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in value)
    if isinstance(value, (bool, np.bool_)):
        raise SpecError("objective params must be numeric")
    return float(value)


@dataclass(frozen=True, eq=True)
class TaskSpec:
    task_id: str
    bounds: tuple[tuple[float, float], ...]
    objective_params: Mapping[str, float | tuple[float, ...]] = field(default_factory=dict)
    parent_id: str | None = None
    level_m: int = 0
    notes: str = ""

    __hash__ = None

    def __post_init__(self):
        if not isinstance(self.task_id, str) or not self.task_id:
            raise SpecError("task_id must be a nonempty string")
        try:
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        except (TypeError, ValueError) as exc:
            raise SpecError(f"malformed bounds: {exc}") from None
        if not bounds:
            raise SpecError("domain needs at least one dimension")
        for k, (lo, hi) in enumerate(bounds):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise SpecError(f"non-finite bound in dimension {k}")
            if not lo < hi:
                raise DegenerateDomainError(f"dimension {k}: lower {lo} must be < upper {hi}")
        if int(self.level_m) != self.level_m or self.level_m < 0:
            raise SpecError("level_m must be a nonnegative integer")
        params = {str(k): _freeze_param(v) for k, v in dict(self.objective_params).items()}
        for key in NOISE_KEYS:
            if key in params and not params[key] >= 0.0:
                raise SpecError(f"{key} must be nonnegative")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "objective_params", params)
        object.__setattr__(self, "level_m", int(self.level_m))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def contains(self, x) -> bool:
        x = np.asarray(x, float).reshape(-1)
        if x.size != self.dim:
            return False
        slack = 1e-12 * (self.upper - self.lower)
        return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))

    def derive(self, **changes) -> "TaskSpec":
        data = dict(
            task_id=self.task_id, bounds=self.bounds, objective_params=self.objective_params,
            parent_id=self.parent_id, level_m=self.level_m, notes=self.notes,
        )
        data.update(changes)
        return TaskSpec(**data)


@dataclass(frozen=True)
class FieldSpec:
    """One editable objective parameter.

    ``kind`` picks the mutation operator: ``weight`` and ``target`` are bounded
    scalars with different step sizes, ``simplex`` is a nonnegative vector
    summing to one, ``fixed`` is carried along but never edited.
    """

    name: str
    kind: str = "weight"
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.kind not in ("weight", "target", "simplex", "fixed"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if not self.lower < self.upper:
            raise ValueError(f"field {self.name}: empty range")


@dataclass(frozen=True)
class TaskSchema:
    fields: tuple[FieldSpec, ...] = ()
    domain_box: tuple[tuple[float, float], ...] | None = None
    domain_editable: bool = True

    @classmethod
    def infer(cls, spec: TaskSpec, domain_editable: bool = True) -> "TaskSchema":
        """Every objective parameter is an editable field with unit range."""
        fields = []
        for name, value in spec.objective_params.items():
            kind = "simplex" if isinstance(value, tuple) else "weight"
            fields.append(FieldSpec(name, kind))
        return cls(tuple(fields), None, domain_editable)

    def field(self, name: str) -> FieldSpec:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def editable(self) -> tuple[FieldSpec, ...]:
        return tuple(f for f in self.fields if f.kind != "fixed")

    def n_editable(self, dim: int) -> int:
        return len(self.editable) + (dim if self.domain_editable else 0)

    def check(self, spec: TaskSpec) -> None:
        names = {f.name for f in self.fields}
        missing = names - set(spec.objective_params)
        if missing:
            raise SpecError(f"spec {spec.task_id} lacks fields {sorted(missing)}")
        if self.domain_box is not None and len(self.domain_box) != spec.dim:
            raise SpecError("spec dimension does not match the schema box")
        for f in self.fields:
            value = spec.objective_params[f.name]
            if f.kind == "simplex":
                v = np.asarray(value, float)
                if v.ndim != 1 or np.any(v < -1e-12) or abs(v.sum() - 1.0) > 1e-9:
                    raise SpecError(f"field {f.name} is not on the simplex")
            elif f.kind != "fixed" and not (f.lower - 1e-12 <= value <= f.upper + 1e-12):
                raise SpecError(f"field {f.name}={value} outside [{f.lower}, {f.upper}]")
        if self.domain_box is not None:
            for k, ((lo, hi), (glo, ghi)) in enumerate(zip(spec.bounds, self.domain_box)):
                if lo < glo - 1e-12 or hi > ghi + 1e-12:
                    raise SpecError(f"dimension {k} leaves the schema box")


def _same(a: float, b: float) -> bool:
    return abs(a - b) <= EQUAL_RTOL * max(1.0, abs(a), abs(b))


def _shared_schema(a: TaskSpec, b: TaskSpec, schema: TaskSchema | None) -> TaskSchema:
    if a.dim != b.dim or set(a.objective_params) != set(b.objective_params):
        raise SpecError("specs do not share a schema")
    for key, va in a.objective_params.items():
        vb = b.objective_params[key]
        if isinstance(va, tuple) != isinstance(vb, tuple) or (
            isinstance(va, tuple) and len(va) != len(vb)
        ):
            raise SpecError(f"field {key} has mismatched shapes")
    schema = TaskSchema.infer(a) if schema is None else schema
    schema.check(a)
    schema.check(b)
    return schema


def field_changed(a, b) -> bool:
    if isinstance(a, tuple):
        return any(not _same(x, y) for x, y in zip(a, b))
    return not _same(a, b)


def edited_fields(child: TaskSpec, parent: TaskSpec, schema: TaskSchema | None = None) -> list[str]:
    schema = _shared_schema(child, parent, schema)
    out = [
        f.name for f in schema.editable
        if field_changed(child.objective_params[f.name], parent.objective_params[f.name])
    ]
    if schema.domain_editable:
        for k, (cb, pb) in enumerate(zip(child.bounds, parent.bounds)):
            if field_changed(cb, pb):
                out.append(f"bounds[{k}]")
    return out


def mutation_ratio(child: TaskSpec, parent: TaskSpec, schema: TaskSchema | None = None) -> float:
    schema = _shared_schema(child, parent, schema)
    total = schema.n_editable(parent.dim)
    if total == 0:
        return 0.0
    return len(edited_fields(child, parent, schema)) / total


def _rescaled_vector(spec: TaskSpec, schema: TaskSchema) -> np.ndarray:
    parts = []
    for f in schema.fields:
        v = np.atleast_1d(np.asarray(spec.objective_params[f.name], float))
        if f.kind != "simplex":
            v = (v - f.lower) / (f.upper - f.lower)
        parts.append(v)
    b = np.asarray(spec.bounds, float)
    if schema.domain_box is not None:
        box = np.asarray(schema.domain_box, float)
        b = (b - box[:, :1]) / (box[:, 1:] - box[:, :1])
    parts.append(b.reshape(-1))
    return np.concatenate(parts)


def task_distance(a: TaskSpec, b: TaskSpec, schema: TaskSchema | None = None) -> float:
    schema = _shared_schema(a, b, schema)
    return float(np.linalg.norm(_rescaled_vector(a, schema) - _rescaled_vector(b, schema)))


def serialize_spec(spec: TaskSpec) -> str:
    """JSON text; floats use the shortest repr that round-trips exactly."""
    params = {
        k: list(v) if isinstance(v, tuple) else v for k, v in spec.objective_params.items()
    }
    doc = {
        "task_id": spec.task_id,
        "parent_id": spec.parent_id,
        "level_m": spec.level_m,
        "dim": spec.dim,
        "bounds": [list(b) for b in spec.bounds],
        "objective_params": params,
        "notes": spec.notes,
    }
    return json.dumps(doc, sort_keys=False)


def deserialize_spec(text: str) -> TaskSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed spec text: {exc}") from None
    if not isinstance(doc, dict):
        raise SpecError("spec text must hold one object")
    missing = [k for k in SPEC_KEYS if k not in doc]
    if missing:
        raise SpecError(f"missing keys {missing}")
    bounds = doc["bounds"]
    if not isinstance(bounds, list) or any(
        not isinstance(b, (list, tuple)) or len(b) != 2 for b in bounds
    ):
        raise SpecError("bounds must be a list of [lo, hi] pairs")
    if "dim" in doc and doc["dim"] != len(bounds):
        raise SpecError(f"dim {doc['dim']} does not match {len(bounds)} bounds")
    if not isinstance(doc["objective_params"], dict):
        raise SpecError("objective_params must be a flat map")
    return TaskSpec(
        task_id=doc["task_id"],
        bounds=bounds,
        objective_params=doc["objective_params"],
        parent_id=doc["parent_id"],
        level_m=doc["level_m"],
        notes=doc["notes"] or "",
    )


@dataclass
class TaskState:
    """Mutable optimization state of one task inside a run."""

    spec: TaskSpec
    index: int
    X: list = field(default_factory=list)
    y: list = field(default_factory=list)
    f: list = field(default_factory=list)
    incumbent: float = -math.inf
    incumbent_x: np.ndarray | None = None
    interval: UtilityInterval = INITIAL_INTERVAL
    envelope: ValueEnvelope = INITIAL_ENVELOPE
    checkpoint: Checkpoint | None = None
    # GP bookkeeping maintained by the per-task optimizer
    kernel: object = None
    last_refit: int = 0
    beta: float = 0.0
    gamma: float = 0.0
    eps_f: float = math.inf
    psi: float = 0.0
    y_scale: float = 1.0

    @property
    def local_counter(self) -> int:
        return len(self.y)

    @property
    def last_checkpoint(self) -> int:
        return 0 if self.checkpoint is None else self.checkpoint.step

    @property
    def noiseless_incumbent(self) -> float:
        vals = [v for v in self.f if not math.isnan(v)]
        return max(vals) if vals else -math.inf


def record_eval(state: TaskState, x, y: float, f: float = math.nan) -> TaskState:
    if not state.spec.contains(x):
        raise ValueError(f"design {np.asarray(x).tolist()} outside the domain of {state.spec.task_id}")
    x = np.asarray(x, float).reshape(-1).copy()
    state.X.append(x)
    state.y.append(float(y))
    state.f.append(float(f))
    if y > state.incumbent:
        state.incumbent = float(y)
        state.incumbent_x = x
    return state


@dataclass(frozen=True)
class EvalRecord:
    t: int
    task_id: str
    level_m: int
    x: tuple[float, ...]
    y: float
    f: float
    incumbent: float
    u_tilde: float
    u_lower: float
    u_upper: float
    U_lower: float
    U_upper: float
    event: str = "eval"
    votes_used: int = 0
    extra: Mapping[str, object] = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.U_upper - self.U_lower


class TaskRegistry:
    """Ordered collection of task states; tasks are only ever added."""

    def __init__(self, unbounded: bool = False):
        self._states: dict[str, TaskState] = {}
        self.events: list[tuple[int, str, str]] = []
        self.unbounded = unbounded

    def register(self, spec: TaskSpec, schema: TaskSchema | None = None) -> int:
        if spec.task_id in self._states:
            raise SpecError(f"duplicate task id {spec.task_id!r}")
        if spec.parent_id is not None and spec.parent_id not in self._states:
            raise SpecError(f"parent {spec.parent_id!r} is not registered")
        if schema is not None:
            schema.check(spec)
        index = len(self._states) + 1
        state = TaskState(spec, index)
        if self.unbounded:
            state.interval = UtilityInterval(-math.inf, math.inf, "objective")
            state.envelope = UNBOUNDED_ENVELOPE
        self._states[spec.task_id] = state
        return index

    def log(self, t: int, kind: str, detail: str = "") -> None:
        self.events.append((t, kind, detail))

    def __getitem__(self, task_id: str) -> TaskState:
        return self._states[task_id]

    def __contains__(self, task_id: str) -> bool:
        return task_id in self._states

    def __iter__(self) -> Iterator[TaskState]:
        return iter(self._states.values())

    def __len__(self) -> int:
        return len(self._states)

    def specs(self) -> list[TaskSpec]:
        return [s.spec for s in self._states.values()]


def register_task(registry: TaskRegistry, spec: TaskSpec, schema: TaskSchema | None = None) -> int:
    return registry.register(spec, schema)
