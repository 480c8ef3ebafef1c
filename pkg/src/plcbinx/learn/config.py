"""Model and training configuration, loadable from ``train.json``."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

from ..forge.labels import LABELS
from ..funcrec import FAMILIES


@dataclass(frozen=True)
class SeqClassifierConfig:
    vocab: int = 4096
    embed_dim: int = 64
    heads: int = 2
    encoder_layers: int = 1
    ffn_dim: int = 128
    max_len: int = 2048
    classes: tuple[str, ...] = FAMILIES
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ValueError("embed_dim must be divisible by heads")


@dataclass(frozen=True)
class GnnConfig:
    bag_dim: int = 256
    hidden: int = 64
    sage_layers: int = 2
    head_hidden: int = 64
    classes: tuple[str, ...] = LABELS
    seed: int = 0

    @property
    def node_in_dim(self) -> int:
        return self.bag_dim + 5 + 2 + 1


@dataclass(frozen=True)
class Stage2Config:
    vocab: int = 4096
    lr: float = 0.5
    steps: int = 300
    l2: float = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 30
    batch: int = 8
    patience: int | None = None  # epochs without validation gain before stopping; None trains all epochs
    val_fraction: float = 0.1
    class_weights: bool = True
    seed: int = 0


@dataclass(frozen=True)
class Hyperparams:
    stage1: SeqClassifierConfig = field(default_factory=SeqClassifierConfig)
    stage1_train: TrainConfig = field(default_factory=TrainConfig)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    gnn: GnnConfig = field(default_factory=GnnConfig)
    gnn_train: TrainConfig = field(default_factory=TrainConfig)

    def with_seed(self, seed: int) -> "Hyperparams":
        from dataclasses import replace
        return replace(self, stage1=replace(self.stage1, seed=seed), stage1_train=replace(self.stage1_train, seed=seed),
                       gnn=replace(self.gnn, seed=seed), gnn_train=replace(self.gnn_train, seed=seed))

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return cls(**data)


def hyperparams_from_dict(data: dict) -> Hyperparams:
    kinds = {"stage1": SeqClassifierConfig, "stage1_train": TrainConfig, "stage2": Stage2Config,
             "gnn": GnnConfig, "gnn_train": TrainConfig}
    unknown = set(data) - set(kinds)
    if unknown:
        raise ValueError(f"unknown train.json sections: {sorted(unknown)}")
    return Hyperparams(**{k: _build(kinds[k], data.get(k, {})) for k in kinds})


def load_hyperparams(path: str | Path | None = None) -> Hyperparams:
    """Read ``train.json``; without a path the packaged defaults are used."""
    if path is None:
        text = resources.files(__package__).joinpath("default_train.json").read_text()
    else:
        text = Path(path).read_text()
    return hyperparams_from_dict(json.loads(text))
