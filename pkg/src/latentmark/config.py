"""Config files (YAML) with LATENTMARK_* environment-variable overrides."""

from __future__ import annotations

import os
from dataclasses import fields
from pathlib import Path

import yaml

from .autoencoder import AutoencoderConfig
from .training import StegoTrainConfig, TrainSchedule

ENV_PREFIX = "LATENTMARK_"


def _coerce(raw: str, target_type):
    if target_type is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def _env_overrides(cls, env, prefix: str) -> dict:
    out = {}
    for f in fields(cls):
        key = f"{ENV_PREFIX}{prefix}{f.name.upper()}"
        if key in env:
            typ = f.type if isinstance(f.type, type) else {"int": int, "float": float,
                                                           "bool": bool, "str": str}.get(str(f.type), str)
            out[f.name] = _coerce(env[key], typ)
    return out


def _load_yaml(path) -> dict:
    if path is None:
        return {}
    data = yaml.safe_load(Path(path).read_text())
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a mapping")
    return data


def load_autoencoder_config(path=None, env=None, **overrides) -> AutoencoderConfig:
    env = os.environ if env is None else env
    data = _load_yaml(path)
    data.update(_env_overrides(AutoencoderConfig, env, "AE_"))
    data.update({k: v for k, v in overrides.items() if v is not None})
    return AutoencoderConfig(**data)


def load_stego_config(path=None, env=None, **overrides) -> StegoTrainConfig:
    env = os.environ if env is None else env
    data = _load_yaml(path)
    sched_data = data.pop("schedule", {}) or {}
    sched_data.update(_env_overrides(TrainSchedule, env, "SCHEDULE_"))
    data.update(_env_overrides(StegoTrainConfig, env, ""))
    data.update({k: v for k, v in overrides.items() if v is not None})
    data["schedule"] = TrainSchedule(**sched_data)
    return StegoTrainConfig(**data)
