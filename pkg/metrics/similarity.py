#!/bin/env python3
# -*- coding: utf-8 -*-
# metrics/similarity.py
"""
Sentence-level cosine indicator over averaged word embeddings.

The embedding source is either a (vocab x d) table, normally the decoder's
own word embedding, or any callable mapping a token id sequence to one
sentence vector (hook for externally trained embeddings).
"""

import numpy as np

from helpers.errors import DegenerateEmbeddingError, EmptySentenceError


def sentence_embedding(seq, embed_table):
    """Mean of the embedding rows of seq (pads already stripped). A float64 table is used without a copy."""
    ids = np.asarray(seq, dtype=np.int64)
    if ids.size == 0:
        raise EmptySentenceError('empty sentence')
    if callable(embed_table):
        return np.asarray(embed_table(ids), dtype=np.float64)
    return np.asarray(embed_table, dtype=np.float64)[ids].mean(axis=0)


def cosine(u, v):
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateEmbeddingError('degenerate embedding')
    return float(np.dot(u, v) / (nu * nv))


def sli_cosine(y_star, y, embed_table, m):
    """S = cos(embed(Y*), embed(Y)) / m."""
    if m <= 0:
        raise ValueError(f'm must be positive, got {m}')
    return cosine(sentence_embedding(y_star, embed_table), sentence_embedding(y, embed_table)) / m
