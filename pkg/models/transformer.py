#!/bin/env python3
# -*- coding: utf-8 -*-
# models/transformer.py
"""
Small pre-LN transformer encoder-decoder on tensorcore.

Decoding is teacher-forced and parallel over positions: one call returns the
logits of every position, which is what the two-pass training step needs.
greedy_generate is the autoregressive path used only for evaluation.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from corpus.vocab import BOS, EOS, PAD
from helpers.errors import ConfigError
from tensorcore import ops
from tensorcore.tensor import Tensor, get_default_dtype, no_grad


TRAIN, EVAL = 'train', 'eval'
MASK_VALUE = -1e9


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    dropout_rate: float = 0.1
    max_len: int = 26
    tie_embeddings: bool = False

    def validate(self):
        for key in ('vocab_size', 'd_model', 'n_heads', 'n_layers', 'd_ff', 'max_len'):
            value = getattr(self, key)
            if not isinstance(value, int) or value <= 0:
                raise ConfigError(f'model.{key} must be a positive integer, got {value!r}')
        if self.d_model % self.n_heads:
            raise ConfigError(f'model.d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})')
        if self.max_len < 2:
            raise ConfigError('model.max_len must be at least 2')
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f'model.dropout_rate must be in [0, 1), got {self.dropout_rate}')
        return self

    def to_dict(self):
        return asdict(self)


def sinusoidal_encoding(max_len, d_model):
    positions = np.arange(max_len)[:, None]
    rates = np.exp(-math.log(10000.0) * (np.arange(0, d_model, 2) / d_model))
    pe = np.zeros((max_len, d_model))
    pe[:, 0::2] = np.sin(positions * rates)
    pe[:, 1::2] = np.cos(positions * rates[:d_model // 2])
    return pe


def init_params(config, seed=0):
    """Named parameters in a fixed order (checkpoint order)."""
    rng = np.random.default_rng(seed)
    dtype = get_default_dtype()
    d, f, v = config.d_model, config.d_ff, config.vocab_size
    params = OrderedDict()

    def xavier(name, n_in, n_out):
        limit = math.sqrt(6.0 / (n_in + n_out))
        params[name] = rng.uniform(-limit, limit, size=(n_in, n_out))

    def zeros(name, n):
        params[name] = np.zeros(n)

    def norm(prefix):
        params[f'{prefix}.gamma'] = np.ones(d)
        params[f'{prefix}.beta'] = np.zeros(d)

    def attention(prefix):
        for proj in ('q', 'k', 'v', 'o'):
            xavier(f'{prefix}.w{proj}', d, d)
            zeros(f'{prefix}.b{proj}', d)

    def feed_forward(prefix):
        xavier(f'{prefix}.w1', d, f)
        zeros(f'{prefix}.b1', f)
        xavier(f'{prefix}.w2', f, d)
        zeros(f'{prefix}.b2', d)

    params['embedding'] = rng.normal(0.0, d ** -0.5, size=(v, d))
    for layer in range(config.n_layers):
        norm(f'enc.{layer}.ln1')
        attention(f'enc.{layer}.self')
        norm(f'enc.{layer}.ln2')
        feed_forward(f'enc.{layer}.ff')
    norm('enc.ln')
    for layer in range(config.n_layers):
        norm(f'dec.{layer}.ln1')
        attention(f'dec.{layer}.self')
        norm(f'dec.{layer}.ln2')
        attention(f'dec.{layer}.cross')
        norm(f'dec.{layer}.ln3')
        feed_forward(f'dec.{layer}.ff')
    norm('dec.ln')
    if not config.tie_embeddings:
        xavier('out.w', d, v)
    zeros('out.b', v)
    return OrderedDict((k, Tensor(a.astype(dtype), requires_grad=True, name=k)) for k, a in params.items())


class Seq2SeqTransformer:
    """
    Encoder-decoder producing per-position vocabulary logits.
    mode is 'train' (dropout on, drawn from the caller's generator) or 'eval'.
    """
    def __init__(self, config, params=None, seed=0):
        self.config = config.validate()
        self.params = params if params is not None else init_params(config, seed)
        self._pe = sinusoidal_encoding(config.max_len, config.d_model).astype(get_default_dtype())
        logging.info(f'Seq2SeqTransformer created. {self.n_parameters()} parameters')

    def parameters(self):
        return list(self.params.values())

    def n_parameters(self):
        return int(sum(p.data.size for p in self.params.values()))

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    @property
    def decoder_embedding(self):
        """Word embedding table used by the decoder, shape vocab_size x d_model."""
        return self.params['embedding'].data

    def state_dict(self):
        return OrderedDict((k, p.data) for k, p in self.params.items())

    def load_state_dict(self, arrays):
        missing = set(self.params) ^ set(arrays)
        if missing:
            raise ConfigError(f'Parameter names do not match: {sorted(missing)}')
        for name, p in self.params.items():
            if arrays[name].shape != p.data.shape:
                raise ConfigError(f'Parameter {name}: shape {arrays[name].shape} != {p.data.shape}')
            p.data = np.array(arrays[name], dtype=p.data.dtype)
            p.grad = None

    # -------------------------
    # Building blocks
    def _p(self, name):
        return self.params[name]

    def _dropout(self, x, mode, rng):
        return ops.dropout(x, self.config.dropout_rate, rng, training=(mode == TRAIN))

    def _embed(self, ids, mode, rng):
        batch, length = ids.shape
        if length > self.config.max_len:
            raise ValueError(f'sequence length {length} exceeds max_len {self.config.max_len}')
        x = ops.mul(ops.embedding_lookup(self._p('embedding'), ids), math.sqrt(self.config.d_model))
        pe = np.ascontiguousarray(np.broadcast_to(self._pe[:length], (batch, length, self.config.d_model)))
        return self._dropout(ops.add(x, Tensor(pe)), mode, rng)

    def _layer_norm(self, x, prefix):
        return ops.layer_norm(x, self._p(f'{prefix}.gamma'), self._p(f'{prefix}.beta'))

    def _split_heads(self, x):
        batch, length, _ = x.shape
        heads = self.config.n_heads
        x = ops.reshape(x, (batch, length, heads, self.config.d_model // heads))
        return ops.transpose(x, (0, 2, 1, 3))

    def _attention(self, query, key_value, blocked, prefix, mode, rng):
        """blocked: boolean, broadcastable to (B, heads, Tq, Tk), True where attention is cut."""
        p = self._p
        q = self._split_heads(ops.linear(query, p(f'{prefix}.wq'), p(f'{prefix}.bq')))
        k = self._split_heads(ops.linear(key_value, p(f'{prefix}.wk'), p(f'{prefix}.bk')))
        v = self._split_heads(ops.linear(key_value, p(f'{prefix}.wv'), p(f'{prefix}.bv')))
        d_head = self.config.d_model // self.config.n_heads
        scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(d_head))
        weights = self._dropout(ops.softmax(ops.masked_fill(scores, blocked, MASK_VALUE), axis=-1), mode, rng)
        context = ops.transpose(ops.matmul(weights, v), (0, 2, 1, 3))
        batch, length = query.shape[:2]
        context = ops.reshape(context, (batch, length, self.config.d_model))
        return ops.linear(context, p(f'{prefix}.wo'), p(f'{prefix}.bo'))

    def _feed_forward(self, x, prefix, mode, rng):
        p = self._p
        hidden = self._dropout(ops.gelu(ops.linear(x, p(f'{prefix}.w1'), p(f'{prefix}.b1'))), mode, rng)
        return ops.linear(hidden, p(f'{prefix}.w2'), p(f'{prefix}.b2'))

    def _residual(self, x, branch, mode, rng):
        return ops.add(x, self._dropout(branch, mode, rng))

    # -------------------------
    # Forward
    def encode(self, src, src_mask=None, mode=EVAL, rng=None):
        """src: B x S ids. src_mask True at padding; defaults to src == PAD."""
        src = np.asarray(src)
        src_mask = (src == PAD) if src_mask is None else np.asarray(src_mask, dtype=bool)
        self._check_ids(src)
        blocked = src_mask[:, None, None, :]
        x = self._embed(src, mode, rng)
        for layer in range(self.config.n_layers):
            prefix = f'enc.{layer}'
            h = self._layer_norm(x, f'{prefix}.ln1')
            x = self._residual(x, self._attention(h, h, blocked, f'{prefix}.self', mode, rng), mode, rng)
            h = self._layer_norm(x, f'{prefix}.ln2')
            x = self._residual(x, self._feed_forward(h, f'{prefix}.ff', mode, rng), mode, rng)
        return self._layer_norm(x, 'enc.ln')

    def decode(self, tgt_input, memory, src_mask, tgt_mask=None, mode=EVAL, rng=None):
        """
        tgt_input: B x T ids starting with BOS. Returns B x T x V logits where
        position t only sees tgt_input[:, :t+1] and the memory.
        """
        tgt_input = np.asarray(tgt_input)
        self._check_ids(tgt_input)
        length = tgt_input.shape[1]
        causal = np.triu(np.ones((length, length), dtype=bool), k=1)[None, None]
        self_blocked = causal if tgt_mask is None else causal | np.asarray(tgt_mask, dtype=bool)[:, None, None, :]
        cross_blocked = np.asarray(src_mask, dtype=bool)[:, None, None, :]

        x = self._embed(tgt_input, mode, rng)
        for layer in range(self.config.n_layers):
            prefix = f'dec.{layer}'
            h = self._layer_norm(x, f'{prefix}.ln1')
            x = self._residual(x, self._attention(h, h, self_blocked, f'{prefix}.self', mode, rng), mode, rng)
            h = self._layer_norm(x, f'{prefix}.ln2')
            x = self._residual(x, self._attention(h, memory, cross_blocked, f'{prefix}.cross', mode, rng), mode, rng)
            h = self._layer_norm(x, f'{prefix}.ln3')
            x = self._residual(x, self._feed_forward(h, f'{prefix}.ff', mode, rng), mode, rng)
        x = self._layer_norm(x, 'dec.ln')
        if self.config.tie_embeddings:
            weight = ops.transpose(self._p('embedding'), (1, 0))
        else:
            weight = self._p('out.w')
        return ops.linear(x, weight, self._p('out.b'))

    def forward(self, batch, mode=EVAL, rng=None, decoder_input=None):
        """Teacher-forced logits for a Batch, optionally on a substituted decoder input."""
        memory = self.encode(batch.context, batch.context_mask, mode, rng)
        tgt = batch.decoder_input if decoder_input is None else decoder_input
        return self.decode(tgt, memory, batch.context_mask, batch.response_mask, mode, rng)

    def greedy_generate(self, src, src_mask=None, max_len=None):
        """
        Autoregressive argmax decoding for evaluation. Returns one id list per
        row, without BOS/EOS, never longer than max_len.
        """
        src = np.asarray(src)
        src_mask = (src == PAD) if src_mask is None else np.asarray(src_mask, dtype=bool)
        max_len = self.config.max_len if max_len is None else min(max_len, self.config.max_len)
        batch = src.shape[0]
        outputs = [[] for _ in range(batch)]
        finished = np.zeros(batch, dtype=bool)
        with no_grad():
            memory = self.encode(src, src_mask, EVAL)
            ys = np.full((batch, 1), BOS, dtype=np.int64)
            for _ in range(max_len):
                logits = self.decode(ys, memory, src_mask, mode=EVAL).data
                next_ids = logits[:, -1].argmax(axis=-1)
                for row, token in enumerate(next_ids):
                    if finished[row]:
                        continue
                    if token == EOS:
                        finished[row] = True
                    else:
                        outputs[row].append(int(token))
                if finished.all() or ys.shape[1] >= max_len:
                    break
                ys = np.concatenate([ys, next_ids[:, None]], axis=1)
        return outputs

    def _check_ids(self, ids):
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise IndexError(f'token id out of range [0, {self.config.vocab_size})')
