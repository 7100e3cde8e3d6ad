"""Persistent configuration stored in ~/.config/focalrd/config.toml."""
from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

_CONFIG_DIR = Path.home() / ".config" / "focalrd"
_CONFIG_FILE = _CONFIG_DIR / "config.toml"

_DEFAULTS: dict = {
    "output": {
        "digits": 15,
        "log_level": "WARNING",
    },
    "fx_search": {
        "starts": 32,
        "iterations": 400,
        "step_decay": 0.9,
        "initial_step": 0.5,
    },
    "oracle": {
        "max_alphabet": 10,
        "max_functions": 1_000_000,
        "starts": 50,
        "grid_points": 2001,
    },
    "sweep": {
        "workers": 4,
        "seed": 0,
    },
    "audit": {
        "p_min": 0.05,
        "p_max": 0.5,
        "p_step": 0.005,
        "implied_entropy": 3.86897353302468,
        "flag_gap": 0.1,
    },
}

SECTIONS = tuple(_DEFAULTS)


def _defaults() -> dict:
    return {section: dict(values) for section, values in _DEFAULTS.items()}


def _toml_escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


def load() -> dict:
    """Return config dict, falling back to defaults on any error."""
    if not _CONFIG_FILE.exists():
        return _defaults()
    try:
        with _CONFIG_FILE.open("rb") as f:
            data = tomllib.load(f)
        cfg = _defaults()
        cfg.update({k: v for k, v in data.items() if k not in SECTIONS})
        for section in SECTIONS:
            if isinstance(data.get(section), dict):
                cfg[section].update(data[section])
        return cfg
    except Exception:
        return _defaults()


def get(section: str, key: str, cfg: dict | None = None):
    """Value of ``section.key`` from ``cfg`` (or a fresh load), default when absent."""
    cfg = load() if cfg is None else cfg
    return cfg.get(section, {}).get(key, _DEFAULTS[section][key])


def update(overrides: dict) -> None:
    """Update config with shallow+section merge and persist."""
    cfg = load()
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key] = {**cfg[key], **value}
        else:
            cfg[key] = value
    _write(cfg)


def coerce_setting(dotted: str, raw: str) -> dict:
    """Turn ``section.key=value`` text into an override dict typed like the default."""
    section, _, key = dotted.partition(".")
    if section not in _DEFAULTS or key not in _DEFAULTS[section]:
        raise KeyError(f"unknown setting {dotted!r}")
    default = _DEFAULTS[section][key]
    if isinstance(default, bool):
        value: object = raw.strip().lower() in {"1", "true", "yes", "on"}
    elif isinstance(default, int):
        value = int(raw)
    elif isinstance(default, float):
        value = float(raw)
    else:
        value = raw
    return {section: {key: value}}


def _toml_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return f'"{_toml_escape(str(value))}"'


def _write(cfg: dict) -> None:
    _CONFIG_DIR.mkdir(parents=True, exist_ok=True)
    lines: list[str] = []
    for section in SECTIONS:
        values = cfg.get(section, {})
        lines.append(f"[{section}]")
        for key, default in _DEFAULTS[section].items():
            lines.append(f"{key} = {_toml_value(type(default)(values.get(key, default)))}")
        lines.append("")
    _CONFIG_FILE.write_text("\n".join(lines), encoding="utf-8")
