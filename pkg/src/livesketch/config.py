"""Runtime configuration: JSON file + environment overrides.

`LIVESKETCH_CONFIG` names a JSON config file; `LIVESKETCH_SEED` overrides the
seed. CLI flags win over both.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

CONFIG_ENV = "LIVESKETCH_CONFIG"
SEED_ENV = "LIVESKETCH_SEED"


@dataclass
class DimsConfig:
    latent_dim: int = 128
    encoder_hidden: int = 256
    decoder_hidden: int = 256
    raster_dim: int = 64
    semantic_dim: int = 64
    fc_hidden: int = 128
    search_dim: int = 64
    raster_size: int = 64
    max_len: int = 96
    conv_channels: tuple = (8, 16, 32, 64)


@dataclass
class TrainSection:
    epochs: int = 150
    batch_size: int = 32
    learning_rate: float = 2e-3
    lr_decay_at: tuple = (90, 130)
    offset_weight: float = 3.0


@dataclass
class CnnTrainSection:
    epochs: int = 15
    batch_size: int = 16
    learning_rate: float = 1e-3


@dataclass
class JointTrainSection:
    epochs: int = 25
    batch_size: int = 32
    learning_rate: float = 1e-3


@dataclass
class IndexSection:
    subspaces: int = 8
    centroids: int = 256
    kmeans_iters: int = 25
    exact: bool = False


@dataclass
class IntentSection:
    clusters: int = 3  # m
    damping: float = 0.5
    diversity_weight: float = 1.0


@dataclass
class PerturbSection:
    steps: int = 200
    learning_rate: float = 0.05
    alpha: float = 0.1


@dataclass
class ServiceSection:
    k: int = 500
    host: str = "127.0.0.1"
    port: int = 8765
    session_ttl_seconds: float = 1800.0


@dataclass
class Config:
    seed: int = 0
    dims: DimsConfig = field(default_factory=DimsConfig)
    vae_train: TrainSection = field(default_factory=TrainSection)
    cnn_train: CnnTrainSection = field(default_factory=CnnTrainSection)
    joint_train: JointTrainSection = field(default_factory=JointTrainSection)
    index: IndexSection = field(default_factory=IndexSection)
    intent: IntentSection = field(default_factory=IntentSection)
    perturb: PerturbSection = field(default_factory=PerturbSection)
    service: ServiceSection = field(default_factory=ServiceSection)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


_SECTIONS = {
    "dims": DimsConfig,
    "vae_train": TrainSection,
    "cnn_train": CnnTrainSection,
    "joint_train": JointTrainSection,
    "index": IndexSection,
    "intent": IntentSection,
    "perturb": PerturbSection,
    "service": ServiceSection,
}


def config_from_dict(data: dict) -> Config:
    cfg = Config()
    for key, value in data.items():
        if key in _SECTIONS:
            section = _SECTIONS[key]()
            for k, v in value.items():
                if not hasattr(section, k):
                    raise ValueError(f"unknown config key {key}.{k}")
                setattr(section, k, tuple(v) if isinstance(getattr(section, k), tuple) else v)
            setattr(cfg, key, section)
        elif key == "seed":
            cfg.seed = int(value)
        else:
            raise ValueError(f"unknown config section {key!r}")
    return cfg


def load_config(path: str | None = None, seed: int | None = None) -> Config:
    """Resolve config from an explicit path, the environment, or defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    cfg = config_from_dict(json.loads(Path(path).read_text())) if path else Config()
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        cfg.seed = int(env_seed)
    if seed is not None:
        cfg.seed = seed
    return cfg
