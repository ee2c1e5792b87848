"""Run configuration: one flat dotted-key text file per experiment.

Lines look like ``thresholds.delta_cre = 0.35``; values are JSON (numbers,
strings, lists, objects, booleans, null), with bare words read as strings
so paths need no quoting.  Unknown keys are rejected to catch typos.  Every
tunable constant has a default matching the reference operating point
(0.35 / 0.2 / 0.2 gate thresholds, 170-slot buffers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import SGDHyperparams
from .engine import EngineConfig
from .evaluation import MODES, ExperimentConfig
from .synth import ChannelSpec, StreamConfig
from .types import Thresholds


class ConfigError(ValueError):
    """Bad key, bad value, or an inconsistent combination."""


_KNOWN_KEYS = {
    "thresholds.delta_cre": 0.35,
    "thresholds.delta_close": 0.2,
    "thresholds.delta_diff": 0.2,
    "buffer.max": 170,
    "buffer.per_class_cap": None,
    "classifier.eta0": 0.1,
    "classifier.decay": 1e-4,
    "classifier.reg": 1e-4,
    "classifier.epochs": 50,
    "classifier.partial_passes": 5,
    "classifier.loss": "log",
    "engine.max_retry_passes": 5,
    "engine.dominance_requires_disagreement": False,
    "engine.scale_thresholds_by_channels": False,
    "eval.ratios": [0.2, 0.5, 0.3],
    "eval.cv_folds": 4,
    "run.modes": list(MODES),
    "run.repetitions": 7,
    "run.base_seed": 0,
    "run.dataset": None,
    "run.output_dir": "runs/latest",
    "data.n_classes": None,
    "data.n_subjects": 20,
    "data.repetitions": 2,
    "data.class_separation": 3.0,
    "data.subject_offset_scale": 1.0,
    "data.noise_scale": 0.5,
    "data.confusable_scale": 0.15,
    "data.seed": 0,
    "data.channels": {"rgb": 16, "skeleton": 16},
    "data.confusable": {},
}


def parse_flat_config(text: str) -> dict:
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        try:
            values[key] = json.loads(value_text)
        except json.JSONDecodeError:
            values[key] = value_text  # bare string, e.g. an unquoted path
    return values


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig = ExperimentConfig()
    modes: tuple[str, ...] = MODES
    repetitions: int = 7
    base_seed: int = 0
    dataset_path: str | None = None
    output_dir: str = "runs/latest"
    stream: StreamConfig | None = None
    raw: dict = field(default_factory=dict, repr=False)


def _build_stream_config(values: dict) -> StreamConfig | None:
    if values.get("data.n_classes") is None:
        return None
    channels_raw = values["data.channels"]
    confusable_raw = values["data.confusable"]
    if not isinstance(channels_raw, dict) or not channels_raw:
        raise ConfigError("data.channels must be a non-empty {name: dim} object")
    if not isinstance(confusable_raw, dict):
        raise ConfigError("data.confusable must be a {name: [[i, j], ...]} object")
    unknown = set(confusable_raw) - set(channels_raw)
    if unknown:
        raise ConfigError(f"data.confusable names unknown channels: {sorted(unknown)}")
    channels = {}
    for name, dim in channels_raw.items():
        pairs = tuple((int(i), int(j)) for i, j in confusable_raw.get(name, []))
        channels[name] = ChannelSpec(dim=int(dim), confusable_pairs=pairs)
    return StreamConfig(
        n_classes=int(values["data.n_classes"]),
        n_subjects=int(values["data.n_subjects"]),
        repetitions=int(values["data.repetitions"]),
        channels=channels,
        class_separation=float(values["data.class_separation"]),
        subject_offset_scale=float(values["data.subject_offset_scale"]),
        noise_scale=float(values["data.noise_scale"]),
        confusable_scale=float(values["data.confusable_scale"]),
        seed=int(values["data.seed"]),
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parsed = parse_flat_config(path.read_text(encoding="utf-8"))
    values = dict(_KNOWN_KEYS)
    values.update(parsed)
    try:
        thresholds = Thresholds(
            delta_cre=float(values["thresholds.delta_cre"]),
            delta_close=float(values["thresholds.delta_close"]),
            delta_diff=float(values["thresholds.delta_diff"]),
        )
        engine = EngineConfig(
            thresholds=thresholds,
            buffer_max=int(values["buffer.max"]),
            per_class_cap=None if values["buffer.per_class_cap"] is None
            else int(values["buffer.per_class_cap"]),
            max_retry_passes=int(values["engine.max_retry_passes"]),
            dominance_requires_disagreement=bool(values["engine.dominance_requires_disagreement"]),
            scale_thresholds_by_channels=bool(values["engine.scale_thresholds_by_channels"]),
        )
        hyper = SGDHyperparams(
            eta0=float(values["classifier.eta0"]),
            decay=float(values["classifier.decay"]),
            reg=float(values["classifier.reg"]),
            epochs=int(values["classifier.epochs"]),
            partial_passes=int(values["classifier.partial_passes"]),
            loss=str(values["classifier.loss"]),
        )
        ratios = tuple(float(r) for r in values["eval.ratios"])
        if len(ratios) != 3:
            raise ValueError("eval.ratios needs exactly three entries")
        experiment = ExperimentConfig(
            engine=engine, hyper=hyper, ratios=ratios, cv_folds=int(values["eval.cv_folds"])
        )
        modes = tuple(values["run.modes"])
        for mode in modes:
            if mode not in MODES:
                raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
        if not modes:
            raise ValueError("run.modes must list at least one mode")
        repetitions = int(values["run.repetitions"])
        if repetitions < 1:
            raise ValueError("run.repetitions must be >= 1")
        stream = _build_stream_config(values)
        if stream is not None:
            stream.validate()
    except (ValueError, TypeError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        experiment=experiment,
        modes=modes,
        repetitions=repetitions,
        base_seed=int(values["run.base_seed"]),
        dataset_path=None if values["run.dataset"] is None else str(values["run.dataset"]),
        output_dir=str(values["run.output_dir"]),
        stream=stream,
        raw=values,
    )


def dump_run_config(config: RunConfig) -> str:
    """Canonical text form of a resolved configuration (stable key order)."""
    values = dict(_KNOWN_KEYS)
    values.update(config.raw)
    lines = [f"{key} = {json.dumps(values[key], sort_keys=True)}" for key in sorted(values)]
    return "\n".join(lines) + "\n"
