"""Run configuration: one JSON document, dataclass blocks, flag overrides."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .san.layers import ARCHITECTURES, HARMONIC_MODES, SIGMAS
from .san.model import READOUTS

TASKS = ("trajectory", "mdi")


@dataclass
class ModelConfig:
    arch: str = "san"
    layers: int = 1
    features: int = 4
    j_down: int = 3
    j_up: int = 3
    j_h: int = 5
    epsilon: float = 0.9
    harmonic: str | None = None  # None keeps the architecture's own mode
    sigma: str = "identity"
    heads: int = 1
    head_combine: str = "concat"
    readout: str = "flatten_mlp"
    mlp_hidden: int | None = None
    gain: float = 1.0
    normalize_laplacians: bool = False

    def validate(self) -> None:
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"arch must be one of {ARCHITECTURES}")
        if self.layers < 1 or self.features < 1 or self.heads < 1:
            raise ConfigError("layers, features and heads must be >= 1")
        if self.j_down < 0 or self.j_up < 0 or self.j_h < 0:
            raise ConfigError("filter orders must be >= 0")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.harmonic is not None and self.harmonic not in HARMONIC_MODES:
            raise ConfigError(f"harmonic must be one of {HARMONIC_MODES}")
        if self.sigma not in SIGMAS:
            raise ConfigError(f"sigma must be one of {SIGMAS}")
        if self.head_combine not in ("concat", "average"):
            raise ConfigError("head_combine must be concat or average")
        if self.readout not in READOUTS:
            raise ConfigError(f"readout must be one of {READOUTS}")
        if self.gain <= 0:
            raise ConfigError("gain must be positive")


@dataclass
class OptimConfig:
    lr: float = 0.01
    l2: float = 0.003
    dropout: float = 0.6
    factor: float = 0.77
    patience: int = 10
    early_stop: int = 100
    max_epochs: int = 300
    batch_size: int = 32
    remask: float = 0.0  # imputation: fraction of known inputs hidden afresh at each step

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.l2 < 0:
            raise ConfigError("l2 must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if not 0.0 <= self.remask < 1.0:
            raise ConfigError("remask must be in [0, 1)")
        if not 0.0 < self.factor < 1.0:
            raise ConfigError("factor must be in (0, 1)")
        if self.patience < 1 or self.early_stop < 1 or self.max_epochs < 1 or self.batch_size < 1:
            raise ConfigError("patience, early_stop, max_epochs and batch_size must be >= 1")


@dataclass
class DataConfig:
    """Either file paths or generator parameters.

    Trajectory task: ``complex`` + ``train`` + ``test`` files, or the
    synthetic-flow generator fields. MDI task: ``complex`` + ``mdi`` files,
    or the co-authorship generator fields.
    """

    complex: str | None = None
    train: str | None = None
    test: str | None = None
    mdi: str | None = None
    points: int = 100
    hole_centers: list = field(default_factory=lambda: [[0.3, 0.3], [0.7, 0.7]])
    hole_radius: float = 0.12
    n_train: int = 200
    n_test: int = 50
    random_test_orientation: bool = False
    authors: int = 300
    papers: int = 200
    max_authors: int = 5
    order: int = 1
    miss: float = 0.3

    def validate(self, task: str) -> None:
        for name in ("complex", "train", "test", "mdi"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"data.{name}: {p} does not exist")
        if task == "trajectory" and self.complex is not None and (self.train is None or self.test is None):
            raise ConfigError("trajectory data from files needs complex, train and test")
        if task == "mdi" and self.complex is not None and self.mdi is None:
            raise ConfigError("mdi data from files needs complex and mdi")
        if not 0.0 < self.miss < 1.0:
            raise ConfigError("miss must be in (0, 1)")
        if self.order < 0:
            raise ConfigError("order must be >= 0")


@dataclass
class RunConfig:
    task: str = "trajectory"
    model: ModelConfig = field(default_factory=ModelConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 0

    def validate(self) -> "RunConfig":
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        self.model.validate()
        self.optim.validate()
        self.data.validate(self.task)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def task_defaults(task: str) -> RunConfig:
    """Desk-scale defaults for each task."""
    if task == "mdi":
        return RunConfig(
            task="mdi",
            model=ModelConfig(arch="san", layers=4, features=256, j_down=2, j_up=2, j_h=0,
                              harmonic="skip", sigma="relu", readout="per_simplex_linear",
                              gain=2 ** 0.5, normalize_laplacians=True),
            optim=OptimConfig(lr=0.01, l2=0.0, dropout=0.0, patience=100, early_stop=500,
                              max_epochs=120, remask=0.3),
        )
    return RunConfig(task=task)


def _merge(obj, updates: dict, where: str):
    names = {f.name for f in fields(obj)}
    unknown = set(updates) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return replace(obj, **updates)


def config_from_dict(d: dict) -> RunConfig:
    d = dict(d)
    unknown = set(d) - {"task", "model", "optim", "data", "seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    base = task_defaults(d.get("task", "trajectory"))
    try:
        return RunConfig(
            task=d.get("task", base.task),
            model=_merge(base.model, d.get("model", {}), "model"),
            optim=_merge(base.optim, d.get("optim", {}), "optim"),
            data=_merge(base.data, d.get("data", {}), "data"),
            seed=int(d.get("seed", base.seed)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(d)


def override(cfg: RunConfig, section: str, **values) -> RunConfig:
    """Copy of ``cfg`` with non-None ``values`` set in ``section``."""
    values = {k: v for k, v in values.items() if v is not None}
    if not values:
        return cfg
    if section == "run":
        return replace(cfg, **values)
    return replace(cfg, **{section: _merge(getattr(cfg, section), values, section)})
