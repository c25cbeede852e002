#!/bin/env python3
# -*- coding: utf-8 -*-
# samplers/two_pass.py
"""
Two-pass training step.

Pass 1 decodes the gold input in one parallel, teacher-forced, dropout-free
pass without recording a graph, and yields Y* (argmax) and P (its
probability) per position. The strategy turns those into a mixed decoder
input. Pass 2 decodes the mixed input with gradients and dropout, scored
against the gold response (targets are never mixed).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from helpers.errors import DegenerateEmbeddingError, EmptySentenceError
from metrics.bleu import sli_bleu
from metrics.similarity import sli_cosine
from models.transformer import EVAL, TRAIN
from samplers import mixing
from samplers.mixing import MixDecision, Source
from samplers.strategies import (AdaptiveBridge, Bilevel, BleuSLI, ConfidenceAware, CosineSLI,
                                 DecaySS, NoSLI, TeacherForcing)
from tensorcore import ops
from tensorcore.tensor import no_grad


@dataclass
class StepContext:
    """
    Randomness and clocks for one step. Dropout draws from the single
    trainer-owned generator; mixing draws from one stream per batch row
    keyed by (seed, epoch, batch index, row).
    """
    seed: int
    epoch: int
    step: int
    batch_index: int
    dropout_rng: np.random.Generator

    def row_rng(self, row):
        return np.random.default_rng([self.seed, self.epoch, self.batch_index, row])


@dataclass
class PassOneOutput:
    pred: np.ndarray    # B x T argmax ids
    conf: np.ndarray    # B x T probability of the argmax


@dataclass
class StepResult:
    loss: object
    decoder_input: np.ndarray
    decisions: List[MixDecision] = field(default_factory=list)
    stats: dict = field(default_factory=dict)


def teacher_forced_predictions(model, batch):
    with no_grad():
        logits = model.forward(batch, mode=EVAL).data.astype(np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=-1, keepdims=True)
    pred = probs.argmax(axis=-1)
    conf = np.take_along_axis(probs, pred[..., None], axis=-1)[..., 0]
    return PassOneOutput(pred=pred, conf=conf)


def sentence_score(sli, pred_row, gold_row, pad_row, embed_table):
    """S for one sentence, pads masked. Degenerate cosine inputs score 0."""
    if isinstance(sli, NoSLI):
        return 1.0
    valid = ~np.asarray(pad_row, dtype=bool)
    y_star = [int(t) for t in np.asarray(pred_row)[valid]]
    y = [int(t) for t in np.asarray(gold_row)[valid]]
    if isinstance(sli, BleuSLI):
        return sli_bleu(y_star, y, sli.m, mode=sli.mode)
    if isinstance(sli, CosineSLI):
        try:
            return sli_cosine(y_star, y, embed_table, sli.m)
        except (DegenerateEmbeddingError, EmptySentenceError) as e:
            logging.debug(f'Sentence score falls back to 0: {e}')
            return 0.0
    raise TypeError(f'Unknown sentence indicator {sli!r}')


def mix_batch(batch, model, strategy, ctx, pass_one: Optional[PassOneOutput] = None):
    """Mixed decoder input for every row, plus the per-row decisions."""
    if isinstance(strategy, TeacherForcing):
        return batch.decoder_input, []
    if pass_one is None:
        pass_one = teacher_forced_predictions(model, batch)
    pred_in, conf_in = mixing.align_to_input(pass_one.pred, pass_one.conf)
    vocab_size = model.config.vocab_size
    # float64 copy of the decoder embedding, once per batch
    table = None
    if isinstance(strategy, (Bilevel, AdaptiveBridge)):
        table = np.asarray(model.decoder_embedding, dtype=np.float64)
    norms = mixing.embedding_norms(table) if isinstance(strategy, AdaptiveBridge) else None
    decisions = []
    for row in range(batch.size):
        rng = ctx.row_rng(row)
        gold = batch.decoder_input[row]
        pad = batch.response_mask[row]
        if isinstance(strategy, Bilevel):
            S = sentence_score(strategy.sli, pass_one.pred[row], batch.response[row], pad, table)
            decision = mixing.bilevel_mix(gold, pred_in[row], conf_in[row], pad, S, strategy, rng, vocab_size)
        elif isinstance(strategy, ConfidenceAware):
            decision = mixing.confidence_aware_mix(gold, pred_in[row], conf_in[row], pad, strategy, rng, vocab_size)
        elif isinstance(strategy, AdaptiveBridge):
            decision = mixing.adaptive_bridge_mix(gold, pred_in[row], pad, table, ctx.epoch, strategy, rng,
                                                  norms=norms)
        elif isinstance(strategy, DecaySS):
            decision = mixing.decay_mix(gold, pred_in[row], pad, ctx.step, strategy.schedule, rng)
        else:
            raise TypeError(f'Unknown strategy {strategy!r}')
        decisions.append(decision)
    return np.stack([d.tokens for d in decisions]), decisions


def mix_statistics(decisions, batch):
    if not decisions:
        return {'gold': 1.0, 'pred': 0.0, 'rand': 0.0, 'mean_p': 0.0, 'mean_S': 1.0}
    sources = []
    probs = []
    for row, d in enumerate(decisions):
        slots = mixing.mixable(batch.response_mask[row])
        sources.append(d.sources[slots])
        probs.append(d.probs[slots])
    sources = np.concatenate(sources)
    probs = np.concatenate(probs)
    if sources.size == 0:
        return {'gold': 1.0, 'pred': 0.0, 'rand': 0.0, 'mean_p': 0.0,
                'mean_S': float(np.mean([d.score for d in decisions]))}
    return {
        'gold': float((sources == Source.GOLD).mean()),
        'pred': float((sources == Source.PRED).mean()),
        'rand': float((sources == Source.RAND).mean()),
        'mean_p': float(probs.mean()),
        'mean_S': float(np.mean([d.score for d in decisions])),
    }


def two_pass_training_step(batch, model, strategy, ctx):
    """
    Loss of one step. Call inside an open tensorcore Graph to get gradients.
    TeacherForcing skips pass 1 and reduces to the plain cross-entropy step.
    """
    decoder_input, decisions = mix_batch(batch, model, strategy, ctx)
    logits = model.forward(batch, mode=TRAIN, rng=ctx.dropout_rng, decoder_input=decoder_input)
    loss = ops.cross_entropy(logits, batch.response, batch.response_mask)
    return StepResult(loss=loss, decoder_input=decoder_input, decisions=decisions,
                      stats=mix_statistics(decisions, batch))
