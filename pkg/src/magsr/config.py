"""Flat dotted-key run configuration with defaults, file loading and overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .provenance import FORMAT_VERSION

# key -> (default, type)
DEFAULTS: dict[str, tuple] = {
    "data.count": (360, int),
    "data.hr_size": (32, int),
    "data.patch_size": (32, int),
    "data.amplitude": (1000.0, float),
    "data.noise_model": ("proportional", str),
    "data.noise_coefficient": (0.05, float),
    "data.blob_min": (2, int),
    "data.blob_max": (6, int),
    "data.seed": (0, int),
    "degrade.scale_factor": (2, int),
    "degrade.kernel_size": (0, int),  # 0 = derive from scale factor
    "degrade.kernel_sigma": (0.0, float),  # 0 = derive from scale factor
    "degrade.boundary_mode": ("reflect", str),
    "split.seed": (0, int),
    "model.base_channels": (32, int),
    "model.depth": (3, int),
    "model.dropout_p": (0.2, float),
    "model.data_scale": (1000.0, float),
    "train.variant": ("both", str),
    "train.epochs": (100, int),
    "train.stage2_epochs": (160, int),
    "train.batch_size": (32, int),
    "train.learning_rate": (2e-3, float),
    "train.stage2_learning_rate": (1e-3, float),
    "train.weight_decay": (1e-4, float),
    "train.seed": (0, int),
    "infer.samples": (50, int),
    "infer.base_seed": (0, int),
    "infer.patch_index": (0, int),
    "infer.format": ("container", str),
    "eval.bin_width": (50.0, float),
    "eval.mc_samples": (20, int),
    "eval.consistency_samples": (20, int),
}


class UnknownConfigKeyError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved flat configuration; every run embeds this in its outputs."""

    values: dict
    format_version: str = FORMAT_VERSION

    def __getitem__(self, key: str):
        return self.values[key]

    def to_json(self) -> dict:
        return {"format_version": self.format_version, **dict(sorted(self.values.items()))}


def _coerce(key: str, raw, kind):
    try:
        if kind is int:
            value = int(raw)
        elif kind is float:
            value = float(raw)
        else:
            value = str(raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"config key {key}: cannot parse {raw!r} as {kind.__name__}") from exc
    return value


def resolve_config(config_path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults <- config file <- overrides, rejecting unknown keys."""
    values = {key: default for key, (default, _) in DEFAULTS.items()}

    def apply(source: dict, origin: str):
        for key, raw in source.items():
            if key == "format_version":
                continue
            if key not in DEFAULTS:
                raise UnknownConfigKeyError(f"unknown config key {key!r} (from {origin})")
            values[key] = _coerce(key, raw, DEFAULTS[key][1])

    if config_path is not None:
        path = Path(config_path)
        try:
            payload = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: config is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ValueError(f"{path}: config must be a JSON object of dotted keys")
        apply(payload, str(path))
    if overrides:
        apply(overrides, "command line")
    return RunConfig(values=values)
