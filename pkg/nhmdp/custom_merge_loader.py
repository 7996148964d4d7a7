"""
dynaconf loader for the nhmdp settings files.

The first entry of `settings_files` is the packaged configuration.toml; it fixes which sections and keys exist.
Every later file (e.g. settings/.local.toml) is merged into it key by key and may only set keys the packaged
defaults declare, so a misspelled `[solver] tolerance = ...` is refused instead of silently ignored.
"""
import tomllib
from pathlib import Path
from typing import Any, Dict, Optional

from nhmdp.log import get_logger

MAX_SETTINGS_FILE_BYTES = 10 * 1024 * 1024
MAX_NESTING_DEPTH = 20

# directives that would make dynaconf load other files or code
FORBIDDEN_DIRECTIVES = {
    'dynaconf_include': 'includes other config files',
    'dynaconf_includes': 'includes other config files',
    'includes': 'includes other config files',
    'preload': 'preloads files that may execute code',
    'preload_for_dynaconf': 'preloads files that may execute code',
    'dynaconf_merge': 'changes the merge behavior',
    'merge_enabled': 'changes the merge behavior',
    'loaders': 'replaces the loaders',
    'core_loaders': 'replaces the core loaders',
    'settings_module': 'loads Python modules',
    'envvar_prefix': 'changes the environment variable prefix',
}

Sections = Dict[str, Dict[str, Any]]


class SettingsSecurityError(Exception):
    pass


class UnknownSettingError(Exception):
    pass


def load(obj, env=None, silent=True, key=None, filename=None):
    """
    Entry point called by dynaconf. `env` and `filename` are part of the loader protocol and unused.

    Args:
        obj: The Dynaconf settings instance to update.
        silent: Log and skip a bad file instead of raising.
        key: Set only this section if given.

    Raises (silent=False only):
        SettingsSecurityError: a loader directive, `includes` on the settings object, or excessive nesting.
        UnknownSettingError: an override file names a section or key the packaged defaults do not declare.
    """
    if getattr(obj, 'includes', None):
        _refuse(SettingsSecurityError("Configuration includes forbidden option: 'includes'."), silent)
        return

    settings_files = getattr(obj, 'settings_files', None) or getattr(obj, 'settings_file', None) or []
    if not settings_files or not isinstance(settings_files, list):
        get_logger().warning("No settings files specified, or not a list. Skipping loading.")
        return

    merged: Sections = {}
    defaults: Optional[Sections] = None
    for index, settings_file in enumerate(settings_files):
        try:
            sections = _read_sections(Path(settings_file))
            if sections is None:
                continue
            if index == 0:
                defaults = sections
            elif defaults is not None:
                check_known_keys(sections, defaults, settings_file)
            for section, values in sections.items():
                merged.setdefault(section, {}).update(values)
        except Exception as e:
            if not silent:
                raise e
            get_logger().exception(f"Exception loading settings file: {settings_file}. Skipping.")

    for section, values in merged.items():
        if key is None or key == section:
            obj.set(section, values)


def _refuse(error: Exception, silent: bool) -> None:
    if not silent:
        raise error
    get_logger().error(f"{error} Skipping loading.")


def _read_sections(path: Path) -> Optional[Sections]:
    """The table-valued sections of one TOML file, or None when the file is skipped."""
    if path.suffix.lower() != '.toml':
        get_logger().warning(f"Only .toml files are allowed. Skipping: {path}")
        return None
    if not path.exists():
        get_logger().debug(f"Settings file not found: {path}. Skipping it.")
        return None
    if path.stat().st_size > MAX_SETTINGS_FILE_BYTES:
        get_logger().warning(f"Settings file too large (> {MAX_SETTINGS_FILE_BYTES} bytes): {path}.")
        return None

    with open(path, 'rb') as f:
        data = tomllib.load(f)
    validate_file_security(data, str(path))

    sections = {}
    for section, values in data.items():
        if isinstance(values, dict):
            sections[section] = values
        else:
            get_logger().warning(f"Top-level key '{section}' in '{path}' is not a [section]. Skipping.")
    return sections


def check_known_keys(sections: Sections, defaults: Sections, filename: str) -> None:
    for section, values in sections.items():
        if section not in defaults:
            raise UnknownSettingError(f"{filename}: unknown section [{section}]")
        unknown = sorted(set(values) - set(defaults[section]))
        if unknown:
            raise UnknownSettingError(f"{filename}: unknown keys in [{section}]: {', '.join(unknown)}")


def validate_file_security(file_data, filename):
    """
    Raises:
        SettingsSecurityError: a forbidden directive at any depth, or nesting deeper than MAX_NESTING_DEPTH.
    """
    def check(data, path, depth):
        if depth <= 0:
            raise SettingsSecurityError(f"Maximum nesting depth exceeded at {path} in {filename}.")
        for name, value in data.items():
            full_path = f"{path}.{name}" if path else name
            reason = FORBIDDEN_DIRECTIVES.get(name.lower())
            if reason:
                raise SettingsSecurityError(f"Forbidden directive '{name}' at {full_path} in {filename}: it {reason}.")
            if isinstance(value, dict):
                check(value, full_path, depth - 1)

    check(file_data, "", MAX_NESTING_DEPTH)
