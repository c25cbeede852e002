#!/bin/env python3
# -*- coding: utf-8 -*-
# samplers/schedules.py
"""
Scalar schedules: decay of the teacher-forcing probability, the smooth
functions fusing sentence and word scores, and the epoch-dependent
selection probability of the adaptive bridge.
"""

import math

from helpers.errors import ConfigError
from samplers.strategies import (AdaptiveBridge, Clamp, ExponentialDecay, LinearDecay,
                                 SigmoidDecay, SigmoidSmooth)


def _logistic(z):
    # Split by sign so exp never overflows
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def decay_value(schedule, i):
    """
    Teacher-forcing probability f(i) at global step i, clamped to [0, 1].
    The model's token is sampled with probability 1 - f(i).
    """
    if i < 0:
        raise ValueError(f'step index must be >= 0, got {i}')
    schedule.validate()
    if isinstance(schedule, LinearDecay):
        value = max(schedule.eps, schedule.k * i + schedule.b)
    elif isinstance(schedule, ExponentialDecay):
        value = schedule.k ** i
    elif isinstance(schedule, SigmoidDecay):
        # k / (k + e^(i/k)) written as a logistic to stay finite for large i
        value = _logistic(math.log(schedule.k) - i / schedule.k)
    else:
        raise ConfigError(f'Unknown decay schedule {schedule!r}')
    return min(1.0, max(0.0, value))


def smooth_value(x, smooth):
    if isinstance(smooth, Clamp):
        return max(min(x, 1.0), 0.0)
    if isinstance(smooth, SigmoidSmooth):
        return _logistic(smooth.k * (x - smooth.b))
    raise ConfigError(f'Unknown smooth function {smooth!r}')


def fuse_and_smooth(S, P_t, smooth):
    """p_t = f(S * P_t)."""
    return smooth_value(S * P_t, smooth)


def bridge_probability(epoch, config: AdaptiveBridge):
    """alpha(epoch) = 1 / (1 + exp(-(epoch - w) / tau)); 0.5 at epoch == w."""
    if epoch < 0:
        raise ValueError(f'epoch must be >= 0, got {epoch}')
    config.validate()
    return _logistic((epoch - config.w) / config.tau)
