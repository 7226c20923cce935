"""Pipeline configuration.

A configuration is a JSON object with one section per stage; every key is
optional and defaults to the value documented in the owning module::

    {"tracker": {"n_reid": 10}, "embedding": {"provider": "external"}}

Unknown keys are rejected. ``key.path=value`` overrides (the CLI's
``--set``) are applied on top of the file before validation.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Optional

import pydantic

from .errors import PitchTrackError
from .fieldmask import FieldMaskConfig
from .pseudolabel import MIN_SCALE_PRESETS, PseudoLabelConfig
from .synth import NoiseSpec, ScenarioSpec
from .tracker import TrackerConfig


class ConfigError(PitchTrackError, ValueError):
    pass


@dataclass
class EmbeddingConfig:
    """Appearance provider selection.

    ``tracker.d_visual_max`` is the gate for external embeddings. The
    histogram provider uses ``visual_gate`` when set, otherwise its own
    default (a fraction of its distance scale).
    """

    provider: Literal["histogram", "external"] = "histogram"
    bins: tuple[int, int, int] = (8, 8, 4)
    gate_fraction: float = 0.8
    visual_gate: Optional[float] = None


@dataclass
class PreprocessConfig:
    soft_nms: bool = False
    method: Literal["linear", "gaussian"] = "linear"
    iou_gate: float = 0.3
    score_floor: float = 0.001
    sigma: float = 0.5


@dataclass
class MetricsConfig:
    iou_thresh: float = 0.5
    conf_thresh: float = 0.5


@dataclass
class AugmentConfig:
    preset: Literal["teacher", "student"] = "student"
    min_scale: Optional[float] = None
    copies: int = 1
    random_offset: bool = False
    seed: int = 0

    def resolved_min_scale(self) -> float:
        return self.min_scale if self.min_scale is not None else MIN_SCALE_PRESETS[self.preset]


@dataclass
class ReIDDatasetConfig:
    batches: int = 10
    seed: int = 0


@dataclass
class Config:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    fieldmask: FieldMaskConfig = field(default_factory=FieldMaskConfig)
    pseudolabel: PseudoLabelConfig = field(default_factory=PseudoLabelConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    reid_dataset: ReIDDatasetConfig = field(default_factory=ReIDDatasetConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    synth: ScenarioSpec = field(default_factory=ScenarioSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)


_ADAPTER = pydantic.TypeAdapter(Config)


def _check_keys(raw: Any, cls, prefix: str = "") -> None:
    if not isinstance(raw, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in raw.items():
        path = f"{prefix}{key}"
        if key not in known:
            raise ConfigError(f"unknown config key {path!r}")
        sub = known[key].default_factory if known[key].default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            _check_keys(value, sub, path + ".")


def parse_override(text: str) -> tuple[list[str], Any]:
    """Split ``a.b=value``; the value is parsed as JSON, else kept as text."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form key=value")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key.strip().split("."), parsed


def apply_overrides(raw: dict, overrides) -> dict:
    raw = json.loads(json.dumps(raw))
    for text in overrides:
        keys, value = parse_override(text)
        node = raw
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r} descends into a non-object")
        node[keys[-1]] = value
    return raw


def config_from_dict(raw: dict, overrides=()) -> Config:
    raw = apply_overrides(raw, overrides)
    _check_keys(raw, Config)
    try:
        return _ADAPTER.validate_python(raw)
    except pydantic.ValidationError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides=()) -> Config:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(raw, overrides)


def dump_config(cfg: Config) -> dict:
    return _ADAPTER.dump_python(cfg, mode="json")
