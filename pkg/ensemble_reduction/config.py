# ensemble_reduction/config.py
from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar, Union

from .clustering import DbscanParams
from .oilfield_synth import OilfieldConfig
from .pipeline import ReductionConfig
from .regress import TrainParams
from .sofm import SofmParams

T = TypeVar("T")

_SECTIONS: Dict[str, type] = {
    "oilfield": OilfieldConfig,
    "gb": TrainParams,
    "sofm": SofmParams,
    "dbscan": DbscanParams,
}


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


def _parse_json(text: str, source: str) -> Dict[str, Any]:
    # Strip whitespace and optional UTF-8 BOM
    text = text.strip().lstrip("\ufeff")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Could not parse {source} as JSON. Details: {e}") from e
    if not isinstance(obj, dict):
        raise ConfigError(f"{source} must contain a JSON object, got {type(obj).__name__}")
    return obj


def _check_type(where: str, key: str, value: Any, default: Any) -> None:
    if isinstance(value, bool) and not isinstance(default, bool):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    if isinstance(default, bool) and not isinstance(value, bool):
        raise ConfigError(f"{where}.{key}: expected true/false, got {value!r}")
    if isinstance(default, int) and not isinstance(default, bool) and not isinstance(value, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
    if isinstance(default, float) and not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    if isinstance(default, dict) and not isinstance(value, dict):
        raise ConfigError(f"{where}.{key}: expected an object, got {value!r}")


def _build(cls: Type[T], obj: Any, where: str) -> T:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {obj!r}")
    known = {f.name: f for f in fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(obj) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}. Allowed: {sorted(known)}")
    defaults = cls()  # type: ignore[call-arg]
    for key, value in obj.items():
        _check_type(where, key, value, getattr(defaults, key))
    try:
        return cls(**obj)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def config_from_dict(obj: Dict[str, Any]) -> ReductionConfig:
    """
    Document shape:
      {
        "seed": 42, "sample_fraction": 0.15, "n_bins_reference": 64,
        "train_size": 2000, "sweep_repeats": 5,
        "oilfield": {...}, "gb": {...}, "sofm": {...}, "dbscan": {...}
      }
    Missing keys take defaults; unknown keys are rejected.
    """
    top = {k: v for k, v in obj.items() if k not in _SECTIONS}
    sections = {k: _build(cls, obj[k], k) for k, cls in _SECTIONS.items() if k in obj}
    cfg = _build(ReductionConfig, top, "config")
    if not sections:
        return cfg
    try:
        return ReductionConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, **sections})
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load_config(path: Optional[Union[str, Path]]) -> ReductionConfig:
    """Read a configuration file; no path means all defaults."""
    if path is None:
        return ReductionConfig()
    with open(path, "r", encoding="utf-8-sig") as f:
        txt = f.read()
    return config_from_dict(_parse_json(txt, str(path)))


def load_oilfield_config(path: Union[str, Path]) -> OilfieldConfig:
    """A flat document holding only OilfieldConfig fields."""
    with open(path, "r", encoding="utf-8-sig") as f:
        txt = f.read()
    return _build(OilfieldConfig, _parse_json(txt, str(path)), "oilfield")
