#!/bin/env python3
# -*- coding: utf-8 -*-
# samplers/mixing.py
"""
Per-row decoder-input mixing rules.

All rules work on rows already aligned to decoder-input positions:
  gold[t]  gold decoder input (gold[0] is BOS)
  pred[t]  pass-1 argmax token for that input slot (prediction made at t-1)
  conf[t]  pass-1 softmax probability of pred[t]
  pad[t]   True at padding
Position 0 and padding are never mixed.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from corpus.vocab import BOS, N_SPECIAL
from samplers.schedules import bridge_probability, decay_value, fuse_and_smooth


class Source(IntEnum):
    GOLD = 0
    PRED = 1
    RAND = 2


@dataclass
class MixDecision:
    tokens: np.ndarray      # mixed decoder input row
    sources: np.ndarray     # Source per position
    probs: np.ndarray       # fused sampling probability p_t, 0 where fixed
    score: float = 1.0      # sentence score S

    def fraction(self, source, pad):
        slots = mixable(pad)
        if not slots.any():
            return 0.0
        return float((self.sources[slots] == source).mean())


def align_to_input(pred, conf):
    """Shift pass-1 outputs right by one so slot t holds the prediction made at t-1."""
    pred = np.asarray(pred)
    conf = np.asarray(conf, dtype=np.float64)
    pred_in = np.empty_like(pred)
    conf_in = np.zeros_like(conf)
    pred_in[..., 0] = BOS
    pred_in[..., 1:] = pred[..., :-1]
    conf_in[..., 1:] = conf[..., :-1]
    return pred_in, conf_in


def mixable(pad):
    slots = ~np.asarray(pad, dtype=bool)
    slots[0] = False
    return slots


def random_token(rng, vocab_size):
    """Uniform over non-special ids."""
    return int(rng.integers(N_SPECIAL, vocab_size))


def _start(gold):
    gold = np.asarray(gold)
    return gold.copy(), np.full(gold.shape, Source.GOLD, dtype=np.int8), np.zeros(gold.shape)


def bilevel_mix(gold, pred, conf, pad, S, config, rng, vocab_size):
    """
    Per slot: draw u ~ U(0,1) and take pred when u < f(S * P_t), gold otherwise.
    Then, when P_t >= alpha, replace with a random word (always when
    rand_guard_prob is 1, else with that probability).
    """
    if config.alpha <= 0:
        raise ValueError(f'alpha must be positive, got {config.alpha}')
    tokens, sources, probs = _start(gold)
    for t in np.flatnonzero(mixable(pad)):
        p = fuse_and_smooth(S, float(conf[t]), config.smooth)
        probs[t] = p
        if rng.random() < p:
            tokens[t] = pred[t]
            sources[t] = Source.PRED
        if conf[t] >= config.alpha:
            if config.rand_guard_prob >= 1.0 or rng.random() < config.rand_guard_prob:
                tokens[t] = random_token(rng, vocab_size)
                sources[t] = Source.RAND
    return MixDecision(tokens, sources, probs, float(S))


def confidence_aware_mix(gold, pred, conf, pad, config, rng, vocab_size):
    """Bucket by P_t: [0, t_golden) gold, [t_golden, t_rand) pred, [t_rand, 1] random word."""
    tokens, sources, probs = _start(gold)
    for t in np.flatnonzero(mixable(pad)):
        if conf[t] < config.t_golden:
            continue
        if conf[t] < config.t_rand:
            tokens[t] = pred[t]
            sources[t] = Source.PRED
        else:
            tokens[t] = random_token(rng, vocab_size)
            sources[t] = Source.RAND
        probs[t] = 1.0
    return MixDecision(tokens, sources, probs)


def embedding_norms(table):
    return np.linalg.norm(table, axis=1)


def adaptive_bridge_mix(gold, pred, pad, embed_table, epoch, config, rng, norms=None):
    """
    pred is eligible when cos(embed(pred_t), embed(gold_t)) > beta; an eligible
    slot takes pred with probability alpha(epoch). Pass a float64 table and its
    row norms to share them across the rows of a batch.
    """
    tokens, sources, probs = _start(gold)
    alpha = bridge_probability(epoch, config)
    table = np.asarray(embed_table, dtype=np.float64)
    if norms is None:
        norms = embedding_norms(table)
    for t in np.flatnonzero(mixable(pad)):
        u = rng.random()
        a, b = int(pred[t]), int(gold[t])
        denom = norms[a] * norms[b]
        similarity = float(table[a] @ table[b] / denom) if denom > 0 else -1.0
        if similarity <= config.beta:
            continue
        probs[t] = alpha
        if u < alpha:
            tokens[t] = pred[t]
            sources[t] = Source.PRED
    return MixDecision(tokens, sources, probs)


def decay_mix(gold, pred, pad, step, schedule, rng):
    """Take pred with probability 1 - f(step) at every slot."""
    tokens, sources, probs = _start(gold)
    p = 1.0 - decay_value(schedule, step)
    for t in np.flatnonzero(mixable(pad)):
        probs[t] = p
        if rng.random() < p:
            tokens[t] = pred[t]
            sources[t] = Source.PRED
    return MixDecision(tokens, sources, probs)
