import csv
import io
import json
import os
import sys
from importlib.metadata import PackageNotFoundError, version
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from nhmdp.algo.errors import UsageError
from nhmdp.algo.model import model_digest
from nhmdp.algo.types import Model, RunReport
from nhmdp.config_loader import get_settings
from nhmdp.log import get_logger


def update_settings_from_args(args: List[str]) -> List[str]:
    """
    Update the settings of the Dynaconf object based on the arguments passed to the function.

    Args:
        args: A list of arguments passed to the function.
        Example args: ['--solver.tol=1e-12', '--check.horizons=[1000]']

    Returns:
        The arguments that are not settings overrides.
    """
    other_args = []
    if args:
        for arg in args:
            arg = arg.strip()
            if arg.startswith('--'):
                arg = arg.strip('-').strip()
                vals = arg.split('=', 1)
                if len(vals) != 2 or '.' not in vals[0]:
                    other_args.append(arg)
                    continue
                key, value = _fix_key_value(*vals)
                get_settings().set(key, value)
                get_logger().info(f'Updated setting {key} to: "{value}"')
            else:
                other_args.append(arg)
    return other_args


def _fix_key_value(key: str, value: str):
    key = key.strip().upper()
    value = value.strip()
    try:
        value = yaml.safe_load(value)
    except Exception as e:
        get_logger().debug(f"Failed to parse YAML for config override {key}={value}", exc_info=e)
    if isinstance(value, str):
        # YAML 1.1 reads exponent floats without a dot ('1e-12') as strings
        try:
            value = float(value)
        except ValueError:
            pass
    return key, value


def get_version() -> str:
    # First check pyproject.toml if running directly out of repository
    if os.path.exists("pyproject.toml"):
        import tomllib
        with open("pyproject.toml", "rb") as f:
            data = tomllib.load(f)
            if data.get("project", {}).get("name") == "nhmdp" and "version" in data["project"]:
                return data["project"]["version"]

    # Otherwise get the installed pip package version
    try:
        return version('nhmdp')
    except PackageNotFoundError:
        get_logger().warning("Unable to find package named 'nhmdp'")
        return "unknown"


def get_thread_count(requested: Optional[int] = None) -> int:
    """--threads, then env NHMDP_THREADS, then config.threads."""
    if requested is None:
        env_value = os.environ.get("NHMDP_THREADS")
        if env_value:
            try:
                requested = int(env_value)
            except ValueError:
                raise UsageError(f"NHMDP_THREADS must be an integer, got '{env_value}'")
        else:
            requested = int(get_settings().config.threads)
    if requested < 1:
        raise UsageError(f"thread count must be at least 1, got {requested}")
    return requested


SIMULATE_DEFAULT_PATHS = -1  # bare --simulate


def resolve_simulate_paths(requested: Optional[int]) -> Optional[int]:
    """--simulate N, or analysis.simulate_paths for a bare --simulate; None when no simulation is asked for."""
    if requested is None:
        return None
    if requested == SIMULATE_DEFAULT_PATHS:
        return int(get_settings().analysis.simulate_paths)
    if requested < 1:
        raise UsageError(f"--simulate needs a positive number of paths, got {requested}")
    return requested


def resolve_state(model: Model, x: Union[int, str]) -> int:
    if isinstance(x, str):
        if x not in model.states:
            raise UsageError(f"unknown state '{x}'")
        return model.states.index(x)
    if not 0 <= int(x) < model.num_states:
        raise UsageError(f"state index {x} outside [0, {model.num_states})")
    return int(x)


def parse_gamma_grid(text: str) -> List[float]:
    """
    'start:stop:step' (inclusive of stop) or a comma-separated list of values.
    Returns the values sorted and de-duplicated.
    """
    text = str(text).strip()
    try:
        if ':' in text:
            start, stop, step = (float(part) for part in text.split(':'))
            if step <= 0 or stop < start:
                raise UsageError(f"invalid gamma range '{text}'")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
        else:
            values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise UsageError(f"invalid gamma grid '{text}'")
    if not values or not all(np.isfinite(values)):
        raise UsageError(f"invalid gamma grid '{text}'")
    # snap accumulated rounding so that 0 and other grid points print exactly
    return sorted({round(value, 12) + 0.0 for value in values})


def to_jsonable(value: Any) -> Any:
    """numpy arrays/scalars to plain lists/floats; non-finite floats to strings ('inf', 'nan')."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else repr(value)
    return value


def format_json(payload: Dict[str, Any]) -> str:
    indent = get_settings().config.get("report_indent", 2)
    return json.dumps(to_jsonable(payload), indent=indent, sort_keys=True)


def format_csv(rows: List[Dict[str, Any]]) -> str:
    if not rows:
        return ""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _csv_cell(value) for key, value in row.items()})
    return buffer.getvalue()


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_output(text: str, out: Optional[str] = None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
        get_logger().info(f"Report written to {out}")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def show_relevant_configurations(relevant_section: str) -> Dict[str, Any]:
    """The [config] and the given section of the active settings, as logged with each report."""
    return {
        "config": dict(get_settings().config.items()),
        relevant_section: dict(get_settings().get(relevant_section, {}).items()),
    }


def new_report(command: str, model: Model) -> RunReport:
    return RunReport(command=command, model_digest=model_digest(model), version=get_version())
