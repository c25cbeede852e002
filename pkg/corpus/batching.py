#!/bin/env python3
# -*- coding: utf-8 -*-
# corpus/batching.py

from dataclasses import dataclass

import numpy as np

from corpus.vocab import BOS, EOS, PAD


@dataclass
class Batch:
    """
    Padded id matrices for one training or evaluation step.
    Masks are True exactly at PAD positions.
    """
    context: np.ndarray         # B x S
    response: np.ndarray        # B x T, gold Y ending with EOS
    decoder_input: np.ndarray   # B x T, [BOS, y_1 .. y_{T-1}]
    context_mask: np.ndarray
    response_mask: np.ndarray
    index: int = 0

    @property
    def size(self):
        return self.context.shape[0]


def encode_sequence(tokens, vocab, max_len):
    """Keep the head: truncate to max_len - 1 tokens, then append EOS."""
    return vocab.encode(tokens[:max_len - 1]) + [EOS]


def pad_rows(rows, pad=PAD):
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), pad, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, :len(r)] = r
    return out


def collate(pairs, vocab, max_len, index=0):
    contexts = [encode_sequence(p.context, vocab, max_len) for p in pairs]
    responses = [encode_sequence(p.response, vocab, max_len) for p in pairs]
    context = pad_rows(contexts)
    response = pad_rows(responses)
    decoder_input = np.full_like(response, PAD)
    decoder_input[:, 0] = BOS
    decoder_input[:, 1:] = response[:, :-1]
    # decoder input shares the response's pad positions
    response_mask = response == PAD
    decoder_input[response_mask] = PAD
    return Batch(context=context, response=response, decoder_input=decoder_input,
                 context_mask=context == PAD, response_mask=response_mask, index=index)


def make_batches(pairs, vocab, batch_size, max_len, seed, shuffle=True):
    """
    Yield Batches in an order fixed by seed alone. The last batch may be short.
    """
    order = np.arange(len(pairs))
    if shuffle:
        order = np.random.default_rng(seed).permutation(len(pairs))
    for index, start in enumerate(range(0, len(pairs), batch_size)):
        chunk = [pairs[i] for i in order[start:start + batch_size]]
        yield collate(chunk, vocab, max_len, index=index)


def count_batches(n_pairs, batch_size):
    return (n_pairs + batch_size - 1) // batch_size
