import json
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
from pydantic import RootModel, ValidationError

from nhmdp.algo.errors import PolicyError
from nhmdp.algo.types import Model, PolicySchedule


class PolicyDocument(RootModel[Dict[str, Dict[str, Union[float, str]]]]):
    """stage index -> {state label: action label, or action parameter in the interval flavor}"""


def check_selector(model: Model, selector: np.ndarray, n: int = None) -> None:
    """Raise PolicyError unless every selected action is a legal action of the model."""
    selector = np.asarray(selector)
    where = f" at stage {n}" if n is not None else ""
    if selector.shape != (model.num_states,):
        raise PolicyError(f"selector{where} has shape {selector.shape}, expected ({model.num_states},)")
    if model.is_interval:
        if not np.all(np.isfinite(selector)) or np.any(selector < 0.0) or np.any(selector > 1.0):
            raise PolicyError(f"action parameter outside [0, 1]{where}")
        return
    if not np.issubdtype(selector.dtype, np.integer):
        raise PolicyError(f"selector{where} must hold action positions")
    if np.any(selector < 0) or np.any(selector >= model.num_actions):
        raise PolicyError(f"unknown action{where}: positions must lie in [0, {model.num_actions})")


def make_policy(model: Model, selectors: List[np.ndarray]) -> PolicySchedule:
    """Policy from one selector per stage 0..q+p-1."""
    if len(selectors) != model.num_stages:
        raise PolicyError(f"expected {model.num_stages} selectors (q+p), got {len(selectors)}")
    dtype = float if model.is_interval else int
    selectors = [np.array(s, dtype=dtype) for s in selectors]
    for n, selector in enumerate(selectors):
        check_selector(model, selector, n)
        selector.flags.writeable = False
    return PolicySchedule(tuple(selectors[:model.q]), tuple(selectors[model.q:]), model.is_interval)


def constant_policy(model: Model, action) -> PolicySchedule:
    """The same action (position or parameter) in every state and stage."""
    dtype = float if model.is_interval else int
    selector = np.full(model.num_states, action, dtype=dtype)
    return make_policy(model, [selector] * model.num_stages)


def _parse_action(model: Model, value: Union[float, str], n: int, state: str):
    if model.is_interval:
        try:
            return float(value)
        except ValueError:
            raise PolicyError(f"stage {n}, state '{state}': '{value}' is not an action parameter")
    if isinstance(value, str) and value in model.actions:
        return model.actions.index(value)
    raise PolicyError(f"stage {n}, state '{state}': unknown action '{value}'")


def load_policy(text: str, model: Model) -> PolicySchedule:
    try:
        document = PolicyDocument.model_validate(json.loads(text)).root
    except (json.JSONDecodeError, ValidationError) as e:
        raise PolicyError(f"malformed policy document: {e}") from e

    expected = {str(n) for n in range(model.num_stages)}
    if set(document) != expected:
        raise PolicyError(f"policy must define exactly the stages 0..{model.num_stages - 1}, "
                          f"got {sorted(document, key=str)}")
    selectors = []
    for n in range(model.num_stages):
        table = document[str(n)]
        if set(table) != set(model.states):
            raise PolicyError(f"stage {n}: policy must map every state exactly once")
        selectors.append([_parse_action(model, table[state], n, state) for state in model.states])
    return make_policy(model, selectors)


def load_policy_file(path, model: Model) -> PolicySchedule:
    return load_policy(Path(path).read_text(encoding="utf-8"), model)


def policy_table(policy: PolicySchedule, model: Model) -> Dict[str, Dict[str, Union[float, str]]]:
    table = {}
    for n, selector in enumerate(policy.selectors):
        if model.is_interval:
            table[str(n)] = {state: float(a) for state, a in zip(model.states, selector)}
        else:
            table[str(n)] = {state: model.actions[int(a)] for state, a in zip(model.states, selector)}
    return table


def serialize_policy(policy: PolicySchedule, model: Model) -> str:
    return json.dumps(policy_table(policy, model), sort_keys=True)


def random_policy(model: Model, rng: np.random.Generator) -> PolicySchedule:
    """Uniformly drawn actions (or action parameters) per stage and state."""
    shape = (model.num_stages, model.num_states)
    if model.is_interval:
        selectors = rng.uniform(0.0, 1.0, size=shape)
    else:
        selectors = rng.integers(0, model.num_actions, size=shape)
    return make_policy(model, list(selectors))
