import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsr.tasks import (
    DegenerateDomainError,
    FieldSpec,
    SpecError,
    TaskRegistry,
    TaskSchema,
    TaskSpec,
    TaskState,
    deserialize_spec,
    edited_fields,
    mutation_ratio,
    record_eval,
    serialize_spec,
    task_distance,
)

EIGHT = tuple(f"w{k}" for k in range(8))


@pytest.fixture
def eight_field_spec():
    return TaskSpec("a", ((0.0, 1.0),), {name: 0.5 for name in EIGHT})


@pytest.fixture
def eight_field_schema():
    return TaskSchema(tuple(FieldSpec(n) for n in EIGHT), domain_editable=False)


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def specs(draw):
    d = draw(st.integers(1, 4))
    bounds = []
    for _ in range(d):
        lo = draw(finite)
        width = draw(st.floats(1e-3, 1e3))
        bounds.append((lo, lo + width))
    params = draw(st.dictionaries(st.text("abcxyz", min_size=1, max_size=4), finite, max_size=4))
    if draw(st.booleans()):
        v = np.asarray(draw(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=4)))
        params["mix"] = tuple(v / v.sum())
    return TaskSpec(draw(st.text("tk0123", min_size=1, max_size=6)), tuple(bounds), params,
                    draw(st.none() | st.just("root")), draw(st.integers(0, 9)), draw(st.text(max_size=10)))


class TestTaskSpec:
    def test_degenerate_bound_rejected(self):
        with pytest.raises(DegenerateDomainError):
            TaskSpec("a", ((0.0, 1.0), (2.0, 2.0)))

    def test_requires_dimension_and_id(self):
        with pytest.raises(SpecError):
            TaskSpec("a", ())
        with pytest.raises(SpecError):
            TaskSpec("", ((0.0, 1.0),))

    def test_negative_noise_rejected(self):
        with pytest.raises(SpecError):
            TaskSpec("a", ((0.0, 1.0),), {"noise_sigma": -0.1})

    def test_contains(self):
        spec = TaskSpec("a", ((0.0, 1.0), (-2.0, 2.0)))
        assert spec.contains([1.0, -2.0])
        assert not spec.contains([1.1, 0.0])
        assert not spec.contains([0.5])


class TestSerialization:
    @given(specs())
    def test_round_trip_is_exact(self, spec):
        assert deserialize_spec(serialize_spec(spec)) == spec

    def test_dim_mismatch_rejected(self):
        doc = json.loads(serialize_spec(TaskSpec("a", ((0.0, 1.0),))))
        doc["dim"] = 2
        with pytest.raises(SpecError):
            deserialize_spec(json.dumps(doc))

    def test_equal_bounds_in_text_rejected(self):
        doc = json.loads(serialize_spec(TaskSpec("a", ((0.0, 1.0),))))
        doc["bounds"] = [[0.5, 0.5]]
        with pytest.raises(DegenerateDomainError):
            deserialize_spec(json.dumps(doc))

    def test_malformed_text_rejected(self):
        with pytest.raises(SpecError):
            deserialize_spec("{not json")
        with pytest.raises(SpecError):
            deserialize_spec("[1, 2]")


class TestMutationRatio:
    def test_identical_is_zero(self, eight_field_spec, eight_field_schema):
        assert mutation_ratio(eight_field_spec, eight_field_spec, eight_field_schema) == 0.0

    def test_two_of_eight(self, eight_field_spec, eight_field_schema):
        params = dict(eight_field_spec.objective_params, w1=0.1, w6=0.9)
        child = eight_field_spec.derive(objective_params=params)
        assert mutation_ratio(child, eight_field_spec, eight_field_schema) == 0.25
        assert edited_fields(child, eight_field_spec, eight_field_schema) == ["w1", "w6"]

    def test_bounds_count_per_dimension(self):
        a = TaskSpec("a", ((0.0, 1.0), (0.0, 1.0)), {"w": 0.5})
        b = a.derive(bounds=((0.0, 2.0), (0.0, 1.0)))
        assert mutation_ratio(b, a) == pytest.approx(1 / 3)

    def test_mismatched_schema_rejected(self):
        with pytest.raises(SpecError):
            mutation_ratio(TaskSpec("a", ((0, 1),), {"w": 0.5}), TaskSpec("b", ((0, 1),), {"v": 0.5}))


class TestTaskDistance:
    @pytest.fixture
    def schema(self):
        return TaskSchema((FieldSpec("w"),), domain_editable=False)

    def test_self_distance_zero(self, schema):
        a = TaskSpec("a", ((0.0, 1.0),), {"w": 0.4})
        assert task_distance(a, a, schema) == 0.0

    def test_single_field(self, schema):
        a = TaskSpec("a", ((0.0, 1.0),), {"w": 0.4})
        b = TaskSpec("b", ((0.0, 1.0),), {"w": 0.7})
        assert task_distance(a, b, schema) == pytest.approx(0.3)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_symmetric(self, w1, w2, t1, t2):
        schema = TaskSchema((FieldSpec("w"), FieldSpec("t", "target")), ((-1.0, 2.0),))
        a = TaskSpec("a", ((0.0, 1.0),), {"w": w1, "t": t1})
        b = TaskSpec("b", ((-0.5, 1.5),), {"w": w2, "t": t2})
        assert task_distance(a, b, schema) == task_distance(b, a, schema)


class TestTaskState:
    def test_incumbent_is_running_max(self):
        state = TaskState(TaskSpec("a", ((0.0, 1.0),)), 1)
        record_eval(state, [0.1], 0.2)
        assert state.incumbent == 0.2
        for x, y in ((0.2, 0.5), (0.3, 0.4)):
            record_eval(state, [x], y)
        assert state.incumbent == 0.5
        np.testing.assert_array_equal(state.incumbent_x, [0.2])

    def test_rejects_design_outside_domain(self):
        with pytest.raises(ValueError):
            record_eval(TaskState(TaskSpec("a", ((0.0, 1.0),)), 1), [1.5], 0.0)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=100))
    def test_incumbent_replay(self, ys):
        state = TaskState(TaskSpec("a", ((0.0, 1.0),)), 1)
        for k, y in enumerate(ys):
            record_eval(state, [0.5], y)
            assert state.incumbent == max(ys[: k + 1])

    def test_noiseless_incumbent_ignores_missing(self):
        state = TaskState(TaskSpec("a", ((0.0, 1.0),)), 1)
        assert state.noiseless_incumbent == -math.inf
        record_eval(state, [0.5], 1.0, 0.3)
        record_eval(state, [0.5], 2.0)
        assert state.noiseless_incumbent == 0.3


class TestRegistry:
    def test_first_registration(self):
        reg = TaskRegistry()
        assert reg.register(TaskSpec("a", ((0.0, 1.0),))) == 1
        env = reg["a"].envelope
        assert (env.lower, env.upper) == (0.0, 1.0)

    def test_duplicate_id_rejected(self):
        reg = TaskRegistry()
        reg.register(TaskSpec("a", ((0.0, 1.0),)))
        with pytest.raises(SpecError):
            reg.register(TaskSpec("a", ((0.0, 2.0),)))

    def test_indices_in_creation_order(self):
        reg = TaskRegistry()
        for k in range(5):
            reg.register(TaskSpec(f"t{k}", ((0.0, 1.0),)))
        assert len(reg) == 5
        assert [s.index for s in reg] == [1, 2, 3, 4, 5]

    def test_unknown_parent_rejected(self):
        with pytest.raises(SpecError):
            TaskRegistry().register(TaskSpec("a", ((0.0, 1.0),), parent_id="ghost"))
