import json

import numpy as np
import pytest

from nhmdp.algo.errors import ModelParseError, ModelValidationError
from nhmdp.algo.model import load_model, model_digest, serialize_model, stage_at, validate
from nhmdp.algo.types import ScheduleSection


def iid_document():
    return {
        "states": ["x0", "x1"],
        "actions": ["a"],
        "anchor": "x0",
        "prefix": [],
        "period": [{"a": {"kernel": [[0.5, 0.5], [0.5, 0.5]], "reward": [0.0, 1.0]}}],
    }


def two_stage_document():
    document = iid_document()
    document["prefix"] = [{"a": {"kernel": [[1.0, 0.0], [0.0, 1.0]], "reward": [5.0, 6.0]}}]
    document["period"].append({"a": {"kernel": [[0.2, 0.8], [0.6, 0.4]], "reward": [1.0, -1.0]}})
    return document


class TestLoadModel:
    def test_load_valid(self):
        model = load_model(json.dumps(iid_document()))
        assert model.states == ("x0", "x1")
        assert model.actions == ("a",)
        assert (model.q, model.p) == (0, 1)
        assert model.anchor_index == 0
        assert np.array_equal(model.stage_at(0).kernels[0], [[0.5, 0.5], [0.5, 0.5]])

    def test_arrays_are_read_only(self):
        model = load_model(json.dumps(iid_document()))
        with pytest.raises(ValueError):
            model.stage_at(0).kernels[0, 0, 0] = 1.0

    def test_malformed_json(self):
        with pytest.raises(ModelParseError):
            load_model("{not json")

    def test_unknown_key(self):
        document = iid_document()
        document["discount"] = 0.9
        with pytest.raises(ModelParseError):
            load_model(json.dumps(document))

    def test_unknown_key_in_record(self):
        document = iid_document()
        document["period"][0]["a"]["cost"] = [0.0, 0.0]
        with pytest.raises(ModelParseError):
            load_model(json.dumps(document))

    def test_both_action_flavors_rejected(self):
        document = iid_document()
        document["action_interval"] = {"grid_points": 3, "endpoint_stages": ["lo", "hi"]}
        with pytest.raises(ModelParseError):
            load_model(json.dumps(document))

    def test_row_sum_violation_names_coordinates(self):
        document = two_stage_document()
        document["period"][1]["a"]["kernel"][1] = [0.6, 0.5]
        with pytest.raises(ModelValidationError) as e:
            load_model(json.dumps(document))
        violation = e.value.violation
        assert violation.section == ScheduleSection.PERIOD
        assert (violation.stage, violation.action, violation.state) == (2, "a", "x1")

    def test_row_sum_tolerance(self):
        document = iid_document()
        document["period"][0]["a"]["kernel"][0] = [0.5, 0.5 + 1e-13]
        load_model(json.dumps(document))
        document["period"][0]["a"]["kernel"][0] = [0.5, 0.5 + 1e-9]
        with pytest.raises(ModelValidationError):
            load_model(json.dumps(document))

    def test_negative_probability(self):
        document = iid_document()
        document["period"][0]["a"]["kernel"][0] = [1.5, -0.5]
        with pytest.raises(ModelValidationError, match="negative probability"):
            load_model(json.dumps(document))

    def test_missing_action_record(self):
        document = iid_document()
        document["actions"] = ["a", "b"]
        with pytest.raises(ModelValidationError, match="missing action record"):
            load_model(json.dumps(document))

    def test_wrong_row_length(self):
        document = iid_document()
        document["period"][0]["a"]["kernel"][1] = [1.0]
        with pytest.raises(ModelValidationError, match="row has 1 entries"):
            load_model(json.dumps(document))

    def test_unknown_anchor(self):
        document = iid_document()
        document["anchor"] = "x9"
        with pytest.raises(ModelValidationError, match="unknown anchor"):
            load_model(json.dumps(document))

    def test_empty_period(self):
        document = iid_document()
        document["period"] = []
        with pytest.raises(ModelValidationError, match="period must contain"):
            load_model(json.dumps(document))

    def test_violations_in_schedule_order(self):
        document = two_stage_document()
        document["period"][0]["a"]["kernel"][0] = [0.9, 0.9]
        document["prefix"][0]["a"]["kernel"][1] = [0.9, 0.9]
        with pytest.raises(ModelValidationError) as e:
            load_model(json.dumps(document))
        assert e.value.violation.section == ScheduleSection.PREFIX
        assert e.value.violation.stage == 0


class TestSchedule:
    def test_periodic_indexing(self):
        model = load_model(json.dumps(two_stage_document()))
        assert (model.q, model.p, model.num_stages) == (1, 2, 3)
        assert stage_at(model, 0) is model.prefix[0]
        assert stage_at(model, 1) is model.period[0]
        assert stage_at(model, 2) is model.period[1]
        assert stage_at(model, 3) is model.period[0]
        assert stage_at(model, 1000) is model.period[1]

    def test_negative_stage(self):
        model = load_model(json.dumps(iid_document()))
        with pytest.raises(ValueError):
            stage_at(model, -1)

    def test_validate_never_raises(self, iid2_model):
        assert validate(iid2_model) == []


class TestIntervalModel:
    def test_grid_and_endpoints(self, interval_model):
        assert interval_model.is_interval
        assert interval_model.num_actions == 11
        assert interval_model.actions[0] == "0.0" and interval_model.actions[-1] == "1.0"
        stage = interval_model.stage_at(0)
        assert stage.endpoint_kernels.shape == (2, 2, 2)
        assert np.allclose(stage.kernels[5], 0.5 * stage.endpoint_kernels[0] + 0.5 * stage.endpoint_kernels[1])

    def test_selected_mixes_endpoints(self, interval_model):
        rows, rewards = interval_model.stage_at(0).selected(np.array([0.0, 1.0]))
        assert np.allclose(rows, [[0.5, 0.5], [0.499, 0.501]])
        assert np.allclose(rewards, [0.0, 1.0])

    def test_invalid_endpoint_record(self, interval_document):
        document = interval_document
        document["period"][0]["hi"]["kernel"][0] = [0.6, 0.6]
        with pytest.raises(ModelValidationError) as e:
            load_model(json.dumps(document))
        assert e.value.violation.action == "hi"


class TestSerialization:
    def test_round_trip_preserves_digest(self, interval_model):
        model = load_model(json.dumps(two_stage_document()))
        for original in (model, interval_model):
            reloaded = load_model(serialize_model(original))
            assert model_digest(reloaded) == model_digest(original)

    def test_digest_depends_on_data(self):
        document = iid_document()
        digest = model_digest(load_model(json.dumps(document)))
        document["period"][0]["a"]["reward"] = [0.0, 2.0]
        assert model_digest(load_model(json.dumps(document))) != digest
