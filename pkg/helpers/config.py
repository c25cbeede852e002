#!/bin/env python3
# -*- coding: utf-8 -*-
# helpers/config.py
"""
Run configuration: config.json -> TrainConfig, with command line overrides.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from helpers.errors import ConfigError
from samplers import strategies


DETERMINISTIC_ENV = 'BISS_DETERMINISTIC'


def deterministic_mode():
    return os.environ.get(DETERMINISTIC_ENV) == '1'


@dataclass
class ModelSection:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    dropout_rate: float = 0.1
    max_len: int = 26
    tie_embeddings: bool = False


@dataclass
class OptimizerConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-9
    warmup_steps: int = 400
    clip_norm: Optional[float] = None


@dataclass
class CorpusConfig:
    train: Optional[str] = None
    valid: Optional[str] = None
    test: Optional[str] = None
    delimiter: str = '__eou__'
    format: Optional[str] = None
    min_freq: int = 1
    max_size: Optional[int] = None


@dataclass
class InfluxConfig:
    url: Optional[str] = None
    org: str = 'biss'
    bucket: str = 'training'


@dataclass
class TrainConfig:
    model: ModelSection = field(default_factory=ModelSection)
    strategy: object = field(default_factory=strategies.TeacherForcing)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    influxdb: InfluxConfig = field(default_factory=InfluxConfig)
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    eval_every: int = 0
    eval_batch_size: int = 64
    checkpoint_every: int = 0
    checkpoint_dir: str = 'runs/default'
    dtype: str = 'float32'
    label: Optional[str] = None

    def validate(self, check_paths=True):
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ConfigError(f'epochs must be >= 1, got {self.epochs!r}')
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ConfigError(f'batch_size must be >= 1, got {self.batch_size!r}')
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f'seed must be a non-negative integer, got {self.seed!r}')
        if self.eval_every < 0 or self.checkpoint_every < 0:
            raise ConfigError('eval_every and checkpoint_every must be >= 0')
        if self.dtype not in ('float32', 'float64'):
            raise ConfigError(f"dtype must be 'float32' or 'float64', got {self.dtype!r}")
        opt = self.optimizer
        if opt.learning_rate <= 0 or not 0 <= opt.beta1 < 1 or not 0 <= opt.beta2 < 1 or opt.epsilon <= 0:
            raise ConfigError(f'Invalid optimizer settings {opt}')
        if opt.warmup_steps < 0:
            raise ConfigError('optimizer.warmup_steps must be >= 0')
        strategies._validate(self.strategy)
        if check_paths:
            if not self.corpus.train:
                raise ConfigError('corpus.train is not set')
            for key in ('train', 'valid', 'test'):
                path = getattr(self.corpus, key)
                if path and not Path(path).exists():
                    raise ConfigError(f'corpus.{key}: {path} does not exist')
        return self

    def to_dict(self):
        out = asdict(self)
        out['strategy'] = strategies.to_dict(self.strategy)
        return out


_SECTIONS = {'model': ModelSection, 'optimizer': OptimizerConfig, 'corpus': CorpusConfig,
             'influxdb': InfluxConfig}


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f'{name} must be an object')
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f'Unknown key(s) in {name}: {", ".join(sorted(unknown))}')
    return cls(**data)


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError('Config root must be an object')
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f'Unknown config key(s): {", ".join(sorted(unknown))}')
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _section(_SECTIONS[key], value, key)
        elif key == 'strategy':
            kwargs[key] = parse_strategy(value)
            if isinstance(value, str) and not data.get('label'):
                kwargs['label'] = strategies.resolve_variant(value)[0]
        else:
            kwargs[key] = value
    return TrainConfig(**kwargs)


def parse_strategy(value):
    """A variant name ("Bilevel-Bleu") or a {"type": ...} object."""
    if isinstance(value, str):
        return strategies.resolve_variant(value)[1]
    return strategies.from_dict(value)


def load_config(path=None):
    if path is None:
        return TrainConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f'Config file {path} not found')
    try:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
    except ValueError as e:
        raise ConfigError(f'{path}: invalid JSON ({e})') from e
    return config_from_dict(data)


def apply_overrides(config, seed=None, strategy=None, corpus=None, out_dir=None):
    if seed is not None:
        config.seed = seed
    if strategy is not None:
        config.label, config.strategy = strategies.resolve_variant(strategy)
    if corpus is not None:
        corpus = Path(corpus)
        if corpus.is_dir():
            for split in ('train', 'valid', 'test'):
                candidate = corpus / f'{split}.txt'
                if candidate.exists():
                    setattr(config.corpus, split, str(candidate))
        else:
            config.corpus.train = str(corpus)
    if out_dir is not None:
        config.checkpoint_dir = str(out_dir)
    if deterministic_mode():
        config.dtype = 'float64'
    return config


def save_config(config, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(config.to_dict(), f, indent=4)
