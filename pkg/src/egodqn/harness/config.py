"""Plain-text ``key = value`` run configuration files."""
from __future__ import annotations

import dataclasses
from pathlib import Path

from egodqn.agent import Variant
from egodqn.harness.runner import RunConfig


class ConfigError(ValueError):
    pass


def _coerce(name: str, raw: str, default):
    if name == "variant":
        return Variant.parse(raw)
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def field_defaults() -> dict:
    return {f.name: f.default for f in dataclasses.fields(RunConfig)}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    defaults = field_defaults()
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in defaults:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw, defaults[key])
        except ValueError as exc:
            raise ConfigError(f"{source}:{n}: {exc}") from exc
    return values


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def build_run_config(file_values: dict, overrides: dict) -> RunConfig:
    """File values first, then non-None ``overrides`` (CLI flags) on top."""
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**merged)
