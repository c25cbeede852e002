#!/bin/env python3
# -*- coding: utf-8 -*-
# samplers/strategies.py
"""
Strategy configurations: which scheduled-sampling rule builds the decoder
input, with its hyperparameters. Serialized as {"type": ..., **fields}.
"""

import json
from dataclasses import dataclass, field, fields, replace
from typing import Union

from helpers.errors import ConfigError


# -------------------------
# Decay schedules (teacher-forcing probability as a function of step)
@dataclass(frozen=True)
class LinearDecay:
    eps: float = 0.1
    k: float = -1e-4
    b: float = 1.0

    def validate(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigError(f'linear decay eps must be in [0, 1], got {self.eps}')


@dataclass(frozen=True)
class ExponentialDecay:
    k: float = 0.9995

    def validate(self):
        if not 0.0 < self.k <= 1.0:
            raise ConfigError(f'exponential decay k must be in (0, 1], got {self.k}')


@dataclass(frozen=True)
class SigmoidDecay:
    k: float = 500.0

    def validate(self):
        if self.k < 1.0:
            raise ConfigError(f'sigmoid decay k must be >= 1, got {self.k}')


Schedule = Union[LinearDecay, ExponentialDecay, SigmoidDecay]


# -------------------------
# Sentence-level indicators
@dataclass(frozen=True)
class NoSLI:
    """Sentence score fixed at 1, so p_t depends on P_t alone."""


@dataclass(frozen=True)
class BleuSLI:
    m: float = 0.8
    mode: str = 'sum'

    def validate(self):
        if self.m <= 0:
            raise ConfigError(f'BLEU indicator m must be positive, got {self.m}')
        if self.mode not in ('sum', 'mean'):
            raise ConfigError(f"BLEU indicator mode must be 'sum' or 'mean', got {self.mode!r}")


@dataclass(frozen=True)
class CosineSLI:
    m: float = 0.6

    def validate(self):
        if self.m <= 0:
            raise ConfigError(f'cosine indicator m must be positive, got {self.m}')


SLI = Union[NoSLI, BleuSLI, CosineSLI]


# -------------------------
# Smooth functions
@dataclass(frozen=True)
class Clamp:
    """f(x) = max(min(x, 1), 0)"""


@dataclass(frozen=True)
class SigmoidSmooth:
    """f(x) = 1 / (1 + exp(-k (x - b)))"""
    k: float = 10.0
    b: float = 0.6

    def validate(self):
        if self.k < 1.0 or self.b <= 0.0:
            raise ConfigError(f'sigmoid smooth needs k >= 1 and b > 0, got k={self.k}, b={self.b}')


Smooth = Union[Clamp, SigmoidSmooth]


# -------------------------
# Strategies
@dataclass(frozen=True)
class TeacherForcing:
    pass


@dataclass(frozen=True)
class DecaySS:
    schedule: Schedule = field(default_factory=ExponentialDecay)

    def validate(self):
        _validate(self.schedule)


@dataclass(frozen=True)
class ConfidenceAware:
    t_golden: float = 0.7
    t_rand: float = 0.95

    def validate(self):
        if not 0.0 <= self.t_golden <= self.t_rand <= 1.0:
            raise ConfigError(f'need 0 <= t_golden <= t_rand <= 1, got {self.t_golden}, {self.t_rand}')


@dataclass(frozen=True)
class AdaptiveBridge:
    beta: float = 0.75
    w: int = 15
    tau: float = 3.0

    def validate(self):
        if self.tau <= 0:
            raise ConfigError(f'adaptive bridge tau must be positive, got {self.tau}')


@dataclass(frozen=True)
class Bilevel:
    sli: SLI = field(default_factory=BleuSLI)
    smooth: Smooth = field(default_factory=SigmoidSmooth)
    alpha: float = 0.95
    rand_guard_prob: float = 1.0

    def validate(self):
        _validate(self.sli)
        _validate(self.smooth)
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f'alpha must be in (0, 1], got {self.alpha}')
        if not 0.0 <= self.rand_guard_prob <= 1.0:
            raise ConfigError(f'rand_guard_prob must be in [0, 1], got {self.rand_guard_prob}')


StrategyConfig = Union[TeacherForcing, DecaySS, ConfidenceAware, AdaptiveBridge, Bilevel]


def _validate(obj):
    check = getattr(obj, 'validate', None)
    if check is not None:
        check()
    return obj


# -------------------------
# (De)serialization
_TYPES = {cls.__name__: cls for cls in (
    LinearDecay, ExponentialDecay, SigmoidDecay, NoSLI, BleuSLI, CosineSLI, Clamp, SigmoidSmooth,
    TeacherForcing, DecaySS, ConfidenceAware, AdaptiveBridge, Bilevel)}
_NESTED = {'schedule', 'sli', 'smooth'}


def to_dict(obj):
    out = {'type': type(obj).__name__}
    for f in fields(obj):
        value = getattr(obj, f.name)
        out[f.name] = to_dict(value) if f.name in _NESTED else value
    return out


def from_dict(data):
    if not isinstance(data, dict) or 'type' not in data:
        raise ConfigError(f'strategy entries need a "type" key, got {data!r}')
    cls = _TYPES.get(data['type'])
    if cls is None:
        raise ConfigError(f'Unknown strategy type {data["type"]!r}')
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key == 'type':
            continue
        if key not in known:
            raise ConfigError(f'{cls.__name__} has no field {key!r}')
        kwargs[key] = from_dict(value) if key in _NESTED else value
    try:
        obj = cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f'Bad {cls.__name__} config: {e}') from e
    return _validate(obj)


# -------------------------
# Named variants used by the ablation runner
VARIANTS = {
    'Transformer': TeacherForcing(),
    'DecaySS-Linear': DecaySS(LinearDecay()),
    'DecaySS-Exponential': DecaySS(ExponentialDecay()),
    'DecaySS-Sigmoid': DecaySS(SigmoidDecay()),
    'Confidence-Aware': ConfidenceAware(t_golden=0.7, t_rand=0.95),
    'AdapBridge': AdaptiveBridge(w=15),
    'Bilevel-None': Bilevel(NoSLI(), SigmoidSmooth(10.0, 0.6), alpha=0.95),
    'Bilevel-Bleu': Bilevel(BleuSLI(m=0.8), SigmoidSmooth(10.0, 0.6), alpha=0.95),
    'Bilevel-Cosine': Bilevel(CosineSLI(m=0.6), SigmoidSmooth(10.0, 0.6), alpha=0.95),
    'Bilevel-f1': Bilevel(BleuSLI(m=0.9), Clamp(), alpha=0.95),
    'Bilevel-f2': Bilevel(BleuSLI(m=0.8), SigmoidSmooth(10.0, 0.6), alpha=0.95),
}
VARIANT_ALIASES = {
    'teacher-forcing': 'Transformer',
    'teacherforcing': 'Transformer',
    'confidence-aware': 'Confidence-Aware',
    'adaptive-bridge': 'AdapBridge',
    'adapbridge': 'AdapBridge',
}


def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        return text


def _split_params(text):
    """Split on commas outside JSON brackets and strings."""
    items, current, depth, quoted = [], [], 0, False
    for ch in text:
        if ch == '"':
            quoted = not quoted
        elif not quoted and ch in '{[':
            depth += 1
        elif not quoted and ch in '}]':
            depth -= 1
        elif ch == ',' and not quoted and depth == 0:
            items.append(''.join(current))
            current = []
            continue
        current.append(ch)
    items.append(''.join(current))
    return items


def _field_names(obj):
    return {f.name for f in fields(obj)}


def override(obj, key, value):
    """
    Copy of obj with one field replaced. key is a field name, a dotted path
    ('sli.m') or a field of exactly one nested part ('m' on a Bilevel).
    """
    head, _, rest = key.partition('.')
    names = _field_names(obj)
    if head not in names:
        owners = [n for n in sorted(_NESTED & names) if head in _field_names(getattr(obj, n))]
        if len(owners) != 1:
            raise ConfigError(f'{type(obj).__name__} has no field {key!r}')
        head, rest = owners[0], key
    if rest:
        return replace(obj, **{head: override(getattr(obj, head), rest, value)})
    if head in _NESTED:
        value = from_dict(value)
    return replace(obj, **{head: value})


def resolve_variant(name):
    """
    (label, strategy) for a named variant, matched case-insensitively.
    'Name:key=value,key=value' overrides fields of the named variant, e.g.
    'Bilevel-Bleu:m=0.6' or 'Bilevel-None:rand_guard_prob=0.5'.
    """
    base, _, params = name.partition(':')
    lowered = {k.lower(): k for k in VARIANTS}
    key = VARIANT_ALIASES.get(base.strip().lower(), lowered.get(base.strip().lower()))
    if key is None:
        raise ConfigError(f'Unknown strategy variant {name!r}. Known: {", ".join(VARIANTS)}')
    strategy = VARIANTS[key]
    if not params.strip():
        return key, _validate(strategy)
    applied = []
    for item in _split_params(params):
        field_name, sep, raw = (s.strip() for s in item.partition('='))
        if not sep or not field_name or not raw:
            raise ConfigError(f'Bad variant parameter {item!r} in {name!r}, expected key=value')
        strategy = override(strategy, field_name, _parse_value(raw))
        applied.append(f'{field_name}={raw}')
    try:
        _validate(strategy)
    except TypeError as e:
        raise ConfigError(f'Bad variant {name!r}: {e}') from e
    return f'{key}:{",".join(applied)}', strategy


def variant_label(strategy):
    """Label for a strategy given as a config object rather than by name."""
    data = to_dict(strategy)
    kind = data.pop('type')
    return f'{kind}:{json.dumps(data, sort_keys=True, separators=(",", ":"))}'
