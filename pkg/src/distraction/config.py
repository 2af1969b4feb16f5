"""YAML run configuration with ``model``, ``train``, ``data`` and ``sweep`` sections.

Every key is optional; missing keys take the tabular-preset defaults below.
Unknown keys anywhere raise :class:`ConfigError`.
"""

import os
from dataclasses import asdict, dataclass, field, fields

import yaml

from .data import SYNTH_SCHEMA, Schema, SynthSpec, load_schema
from .errors import ConfigError
from .model import PRESETS, ModelConfig
from .sweep import DEFAULT_ETAS
from .trainer import TrainConfig

MODEL_KEYS = ("preset", "pre_widths", "distraction_depth", "distraction_width", "head_widths",
              "activation", "distraction_activation")
TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig))


@dataclass
class DataSection:
    path: str | None = None
    schema: str | dict | None = None
    synthetic: dict | None = None
    split_fraction: float = 2 / 3
    split_seed: int = 0


@dataclass
class SweepSection:
    etas: list = field(default_factory=lambda: list(DEFAULT_ETAS))
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    workers: int = 1
    dp_max: float | None = None
    acc_base: float | None = None
    baselines: str | None = None


@dataclass
class RunConfig:
    model: dict = field(default_factory=lambda: {"preset": "adult"})
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataSection = field(default_factory=DataSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    base_dir: str = "."

    def model_config(self, input_dim, seed=0):
        m = dict(self.model)
        preset = m.pop("preset", None)
        base = dict(PRESETS[preset]) if preset else {}
        base.update(m)
        return ModelConfig(input_dim=input_dim, seed=seed, **base)

    def schema(self):
        s = self.data.schema
        if s is None:
            if self.data.synthetic is not None:
                return Schema(**SYNTH_SCHEMA)
            raise ConfigError("data.schema is required for CSV input")
        if isinstance(s, dict):
            return Schema.from_dict(s)
        return load_schema(self.resolve(s))

    def synth_spec(self):
        return None if self.data.synthetic is None else SynthSpec.from_dict(self.data.synthetic)

    def resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def to_dict(self):
        return {"model": dict(self.model), "train": self.train.to_dict(),
                "data": asdict(self.data), "sweep": asdict(self.sweep)}


def _section(doc, name, allowed):
    sec = doc.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(sec) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    return sec


def parse_config(doc, base_dir="."):
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping of sections")
    unknown = set(doc) - {"model", "train", "data", "sweep"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    model = _section(doc, "model", MODEL_KEYS)
    preset = model.setdefault("preset", "adult")
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    try:
        train = TrainConfig(**_section(doc, "train", TRAIN_KEYS))
        data = DataSection(**_section(doc, "data", [f.name for f in fields(DataSection)]))
        sweep = SweepSection(**_section(doc, "sweep", [f.name for f in fields(SweepSection)]))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    if data.path is not None and data.synthetic is not None:
        raise ConfigError("data.path and data.synthetic are mutually exclusive")
    if data.synthetic is not None:
        SynthSpec.from_dict(data.synthetic)
    cfg = RunConfig(model=model, train=train, data=data, sweep=sweep, base_dir=base_dir)
    cfg.model_config(1)  # validate widths/activations early
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))
