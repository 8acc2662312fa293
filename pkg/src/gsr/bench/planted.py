"""A parametric task family with closed-form optima and a latent preference model.

Each task maximizes ``quality(params) - curvature * ||x - target||^2`` over
its box. ``quality`` peaks at a planted parameter setting, so the long-run
value of every task is known exactly and mutations that move toward the
planted setting are measurably better.
"""

from __future__ import annotations

import numpy as np

from ..tasks import FieldSpec, TaskSchema, TaskSpec
from ..utility import BtWorld, sigmoid

PLANTED_MIX = (0.6, 0.3, 0.1)
PLANTED_GAIN = 0.8
CURVATURE = 0.5
PREFERENCE_SLOPE = 4.0
PREFERENCE_CENTER = 0.5

PLANTED_SCHEMA = TaskSchema(
    fields=(
        FieldSpec("mix", "simplex"),
        FieldSpec("gain", "weight"),
        FieldSpec("t0", "target"),
        FieldSpec("t1", "target"),
    ),
    domain_box=((0.0, 1.0), (0.0, 1.0)),
    domain_editable=True,
)


def planted_spec(task_id="task1", mix=(1 / 3, 1 / 3, 1 / 3), gain=0.3, target=(0.7, 0.4),
                 bounds=((0.0, 1.0), (0.0, 1.0)), parent_id=None, level_m=0) -> TaskSpec:
    params = {"mix": tuple(mix), "gain": gain, "t0": target[0], "t1": target[1]}
    return TaskSpec(task_id, bounds, params, parent_id, level_m)


def quality(spec: TaskSpec) -> float:
    p = spec.objective_params
    mix = np.asarray(p["mix"], float)
    return 1.0 - float(np.sum((mix - PLANTED_MIX) ** 2)) - (p["gain"] - PLANTED_GAIN) ** 2


def target(spec: TaskSpec) -> np.ndarray:
    return np.array([spec.objective_params["t0"], spec.objective_params["t1"]])


def planted_value(spec: TaskSpec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, float))
    return quality(spec) - CURVATURE * ((X - target(spec)) ** 2).sum(1)


def planted_optimum(spec: TaskSpec) -> float:
    t = target(spec)
    nearest = np.clip(t, spec.lower, spec.upper)
    return quality(spec) - CURVATURE * float(((t - nearest) ** 2).sum())


def planted_objective(spec: TaskSpec, x, rng: np.random.Generator):
    f = float(planted_value(spec, x)[0])
    sigma = spec.objective_params.get("noise_sigma", 0.0)
    y = f + sigma * float(rng.standard_normal()) if sigma > 0 else f
    return y, f


def preference_score(spec: TaskSpec, z: float) -> float:
    return PREFERENCE_SLOPE * (z - PREFERENCE_CENTER)


def planted_world() -> BtWorld:
    return BtWorld(preference_score)


def planted_utility(spec: TaskSpec, z: float) -> float:
    """Win probability of ``(spec, z)`` against the reference; Lipschitz 1 in ``z``."""
    return float(sigmoid(preference_score(spec, z)))


def planted_long_run_value(spec: TaskSpec) -> float:
    return planted_utility(spec, planted_optimum(spec))


UTILITY_LIPSCHITZ = PREFERENCE_SLOPE / 4.0


def five_task_family() -> list[TaskSpec]:
    """Seed task plus four siblings spanning low to high long-run value."""
    return [
        planted_spec("task1"),
        planted_spec("task2", mix=(0.6, 0.3, 0.1), gain=0.8, target=(0.3, 0.6)),
        planted_spec("task3", mix=(0.2, 0.2, 0.6), gain=0.5, target=(0.5, 0.5)),
        planted_spec("task4", mix=(0.5, 0.4, 0.1), gain=0.6, target=(0.95, 0.2), bounds=((0.0, 0.6), (0.0, 1.0))),
        planted_spec("task5", mix=(0.1, 0.1, 0.8), gain=0.1, target=(0.2, 0.9)),
    ]


def planted_seed() -> TaskSpec:
    return planted_spec("task1")

