"""JSON run configuration with strict key checking."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .data import SyntheticSpec
from .errors import ConfigError
from .experiment import ExperimentConfig
from .negmining import NegMiningConfig
from .scoring import ScoreConfig
from .train import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    synthetic: SyntheticSpec = SyntheticSpec()
    pretrain: TrainConfig = ExperimentConfig.pretrain
    train: TrainConfig = ExperimentConfig.train
    score: ScoreConfig = ScoreConfig()
    negmining: NegMiningConfig = ExperimentConfig.negmining
    lambdas: tuple = (0.0, 1e-3)
    seeds: tuple = (0, 1, 2, 3, 4)
    output_dir: str = "results"
    seed: int = 0

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(self.synthetic, self.pretrain, self.train, self.score,
                                self.negmining, tuple(self.lambdas), tuple(self.seeds))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambdas"], d["seeds"] = list(self.lambdas), list(self.seeds)
        return d


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}")
        elif isinstance(default, tuple):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "config")


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
