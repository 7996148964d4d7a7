import hashlib
import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from nhmdp.algo import ROW_SUM_TOL
from nhmdp.algo.errors import ModelParseError, ModelValidationError
from nhmdp.algo.types import ActionInterval, Model, ScheduleSection, Stage, Violation
from nhmdp.log import get_logger


class ActionRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kernel: List[List[float]]
    reward: List[float]


class ActionIntervalDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid_points: int = Field(ge=2)
    endpoint_stages: Tuple[str, str]


class ModelDocument(BaseModel):
    """Schema of the model file. Unknown keys are rejected at every level."""
    model_config = ConfigDict(extra="forbid")

    states: List[str] = Field(min_length=1)
    actions: Optional[List[str]] = Field(default=None, min_length=1)
    action_interval: Optional[ActionIntervalDocument] = None
    anchor: str
    prefix: List[Dict[str, ActionRecord]] = Field(default_factory=list)
    period: List[Dict[str, ActionRecord]]

    @model_validator(mode="after")
    def _one_action_flavor(self):
        if (self.actions is None) == (self.action_interval is None):
            raise ValueError("exactly one of 'actions' or 'action_interval' must be given")
        return self


def _sections(model: Model):
    for section, stages, offset in ((ScheduleSection.PREFIX, model.prefix, 0),
                                    (ScheduleSection.PERIOD, model.period, model.q)):
        for i, stage in enumerate(stages):
            yield section, offset + i, stage


def _action_labels(model: Model) -> Tuple[str, ...]:
    """Labels of the records a stage is stored under: the actions, or the two interval endpoints."""
    if model.is_interval:
        return model.action_interval.endpoint_labels
    return model.actions


def validate(model: Model) -> List[Violation]:
    """
    Check every Model invariant. Never raises; returns the violations in schedule order
    (model-level first, then prefix stages, then period stages; rows in state order).
    """
    violations = []
    if model.anchor not in model.states:
        violations.append(Violation(ScheduleSection.MODEL, f"unknown anchor '{model.anchor}'"))
    if model.p < 1:
        violations.append(Violation(ScheduleSection.MODEL, "period must contain at least one stage"))

    labels = _action_labels(model)
    for section, n, stage in _sections(model):
        for a, label in enumerate(labels):
            kernel = stage.extreme_kernels[a]
            reward = stage.extreme_rewards[a]
            for x, state in enumerate(model.states):
                row = kernel[x]
                coordinates = dict(stage=n, action=label, state=state)
                if not np.all(np.isfinite(row)):
                    violations.append(Violation(section, "non-finite probability", **coordinates))
                    continue
                if np.any(row < 0):
                    violations.append(Violation(section, "negative probability", **coordinates))
                row_sum = float(row.sum())
                if abs(row_sum - 1.0) > ROW_SUM_TOL:
                    violations.append(Violation(section, f"row sums to {row_sum!r}, not 1", **coordinates))
                if not np.isfinite(reward[x]):
                    violations.append(Violation(section, "non-finite reward", **coordinates))
    return violations


def stage_at(model: Model, n: int) -> Stage:
    return model.stage_at(n)


def _structural_violations(document: ModelDocument, labels: Tuple[str, ...]) -> List[Violation]:
    violations = []
    num_states = len(document.states)
    if len(set(document.states)) != num_states:
        violations.append(Violation(ScheduleSection.MODEL, "duplicate state labels"))
    if len(set(labels)) != len(labels):
        violations.append(Violation(ScheduleSection.MODEL, "duplicate action labels"))

    q = len(document.prefix)
    for section, stages, offset in ((ScheduleSection.PREFIX, document.prefix, 0),
                                    (ScheduleSection.PERIOD, document.period, q)):
        for i, stage in enumerate(stages):
            n = offset + i
            missing = [label for label in labels if label not in stage]
            unknown = [label for label in stage if label not in labels]
            for label in missing:
                violations.append(Violation(section, "missing action record", stage=n, action=label))
            for label in unknown:
                violations.append(Violation(section, "unknown action", stage=n, action=label))
            for label in labels:
                record = stage.get(label)
                if record is None:
                    continue
                if len(record.reward) != num_states:
                    violations.append(Violation(section, f"reward has {len(record.reward)} entries, "
                                                         f"expected {num_states}", stage=n, action=label))
                if len(record.kernel) != num_states:
                    violations.append(Violation(section, f"kernel has {len(record.kernel)} rows, "
                                                         f"expected {num_states}", stage=n, action=label))
                for x, row in enumerate(record.kernel[:num_states]):
                    if len(row) != num_states:
                        violations.append(Violation(section, f"row has {len(row)} entries, expected {num_states}",
                                                    stage=n, action=label, state=document.states[x]))
    return violations


def _build_stage(stage: Dict[str, ActionRecord], labels: Tuple[str, ...],
                 interval: Optional[ActionInterval]) -> Stage:
    kernels = np.array([stage[label].kernel for label in labels], dtype=float)
    rewards = np.array([stage[label].reward for label in labels], dtype=float)
    if interval is not None:
        return Stage.from_endpoints(kernels, rewards, interval.grid)
    return Stage(kernels, rewards)


def _grid_labels(interval: ActionInterval) -> Tuple[str, ...]:
    return tuple(repr(float(a)) for a in interval.grid)


def load_model(text: str) -> Model:
    """
    Parse and validate a model document.

    Raises:
        ModelParseError: malformed JSON, wrong types or unknown keys.
        ModelValidationError: the first violated invariant, with stage/action/row coordinates.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelParseError(f"model document is not valid JSON: {e}") from e
    try:
        document = ModelDocument.model_validate(data)
    except ValidationError as e:
        raise ModelParseError(f"model document does not match the schema: {e}") from e

    if document.action_interval is not None:
        interval = ActionInterval(document.action_interval.grid_points,
                                  tuple(document.action_interval.endpoint_stages))
        labels = interval.endpoint_labels
        actions = _grid_labels(interval)
    else:
        interval = None
        labels = tuple(document.actions)
        actions = labels

    violations = _structural_violations(document, labels)
    if violations:
        raise ModelValidationError(violations[0])

    model = Model(
        states=tuple(document.states),
        actions=actions,
        anchor=document.anchor,
        prefix=tuple(_build_stage(stage, labels, interval) for stage in document.prefix),
        period=tuple(_build_stage(stage, labels, interval) for stage in document.period),
        action_interval=interval,
    )
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations[0])
    get_logger().debug(f"Loaded model: S={model.num_states}, A={model.num_actions}, q={model.q}, p={model.p}")
    return model


def load_model_file(path) -> Model:
    return load_model(Path(path).read_text(encoding="utf-8"))


def _stage_document(stage: Stage, labels: Tuple[str, ...]) -> Dict[str, dict]:
    return {
        label: {"kernel": stage.extreme_kernels[a].tolist(), "reward": stage.extreme_rewards[a].tolist()}
        for a, label in enumerate(labels)
    }


def serialize_model(model: Model) -> str:
    """Canonical JSON text of a model; load_model(serialize_model(m)) reproduces m exactly."""
    labels = _action_labels(model)
    document = {
        "states": list(model.states),
        "anchor": model.anchor,
        "prefix": [_stage_document(stage, labels) for stage in model.prefix],
        "period": [_stage_document(stage, labels) for stage in model.period],
    }
    if model.is_interval:
        document["action_interval"] = {"grid_points": model.action_interval.grid_points,
                                       "endpoint_stages": list(labels)}
    else:
        document["actions"] = list(model.actions)
    return json.dumps(document, sort_keys=True)


def model_digest(model: Model) -> str:
    return hashlib.sha256(serialize_model(model).encode("utf-8")).hexdigest()


def build_model(states, actions, anchor, prefix, period) -> Model:
    """
    Convenience constructor from arrays: each stage is a (kernels[A,S,S], rewards[A,S]) pair.
    Runs the same validation as load_model.
    """
    model = Model(tuple(states), tuple(actions), anchor,
                  tuple(Stage(k, r) for k, r in prefix), tuple(Stage(k, r) for k, r in period))
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations[0])
    return model
