"""Run configuration: INI-style sections, typed coercion, strict key checking."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .ingest import IngestConfig
from .losses import LossConfig
from .model import ModelConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class EvalConfig:
    threshold: float = 0.5
    ks: tuple = (10, 50)
    # -1 ranks against every non-interacted item
    num_negatives: int = 99
    split: str = "test"


@dataclass
class SpectrumConfig:
    buckets: int = 10
    mode: str = "energy"
    center: bool = True
    mf_lr: float = 0.01
    mf_reg: float = 0.01
    mf_epochs: int = 50
    max_nodes: int = 3000
    kernel_layers: int = 2
    step: float = 0.01


@dataclass
class DiagnoseConfig:
    which: str = "representation"


@dataclass
class RunSection:
    seed: int = 0
    seeds: int = 5
    format: str = "csv"


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    diagnose: DiagnoseConfig = field(default_factory=DiagnoseConfig)

    # the run seed drives every component
    _SEEDED = ("ingest", "model", "train")

    def sections(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def set(self, section: str, key: str, raw):
        sec = self.sections().get(section)
        if sec is None:
            raise ConfigError(f"unknown config section [{section}]")
        names = {f.name: f for f in dataclasses.fields(sec)}
        if key not in names or (section in self._SEEDED and key == "seed"):
            raise ConfigError(f"unknown config key {section}.{key}")
        setattr(sec, key, _coerce(getattr(sec, key), raw, f"{section}.{key}"))

    def resolve(self):
        for name in self._SEEDED:
            getattr(self, name).seed = self.run.seed
        return self

    def to_dict(self):
        self.resolve()
        out = {}
        for name, sec in self.sections().items():
            d = dataclasses.asdict(sec)
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        return out

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _coerce(current, raw, where):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if isinstance(current, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            return tuple(int(p) for p in text.split(",") if p.strip())
        if current is None or isinstance(current, str):
            return None if text.lower() == "none" and current is None else _unescape(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(current).__name__}") from None
    raise ConfigError(f"{where}: unsupported value type")


def _unescape(text):
    return {"\\t": "\t", "tab": "\t"}.get(text, text)


def load_config(path=None, overrides=()) -> RunConfig:
    """Read an INI file (optional) then apply ``section.key=value`` overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if parser.defaults():
            raise ConfigError("keys outside a section are not allowed")
        for section in parser.sections():
            for key, value in parser.items(section):
                cfg.set(section, key, value)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.split(".", 1)
        cfg.set(section.strip(), key.strip(), value)
    return cfg
