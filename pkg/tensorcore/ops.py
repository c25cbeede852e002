#!/bin/env python3
# -*- coding: utf-8 -*-
# tensorcore/ops.py
"""
Differentiable primitives. Each op computes its forward value with numpy and
records a closure returning the gradients of its inputs.

No broadcasting beyond a bias add over the last axis.
"""

import math

import numpy as np

from helpers.errors import ShapeError
from tensorcore.tensor import Tensor, as_tensor, record


def _check_same_shape(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f'{op}: shape mismatch {a.shape} vs {b.shape}')


def add(a, b):
    """Elementwise sum; b may also be a bias over the last axis of a."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        def backward_fn(g):
            return g, g
        return record('add', (a, b), a.data + b.data, backward_fn)

    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:
        def backward_fn(g):
            return g, g.reshape(-1, b.shape[0]).sum(axis=0)
        return record('bias_add', (a, b), a.data + b.data, backward_fn)

    raise ShapeError(f'add: shape mismatch {a.shape} vs {b.shape}')


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape('sub', a, b)

    def backward_fn(g):
        return g, -g
    return record('sub', (a, b), a.data - b.data, backward_fn)


def mul(a, b):
    """Elementwise product of equal shapes, or scaling by a Python number."""
    a = as_tensor(a)
    if isinstance(b, (int, float, np.floating)):
        factor = float(b)

        def backward_fn(g):
            return (g * factor,)
        return record('scale', (a,), a.data * np.asarray(factor, dtype=a.dtype), backward_fn)

    b = as_tensor(b)
    _check_same_shape('mul', a, b)
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        return g * b_data, g * a_data
    return record('mul', (a, b), a_data * b_data, backward_fn)


def matmul(a, b):
    """
    Matrix product over the last two axes.
    Leading (batch) axes must match exactly.
    """
    a, b = as_tensor(a), as_tensor(b)
    if (a.ndim < 2 or b.ndim < 2 or a.ndim != b.ndim
            or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]):
        raise ShapeError(f'matmul: cannot multiply {a.shape} by {b.shape}')
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        return (np.matmul(g, np.swapaxes(b_data, -1, -2)),
                np.matmul(np.swapaxes(a_data, -1, -2), g))
    return record('matmul', (a, b), np.matmul(a_data, b_data), backward_fn)


def transpose(x, axes):
    x = as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward_fn(g):
        return (np.transpose(g, inverse),)
    return record('transpose', (x,), np.transpose(x.data, axes), backward_fn)


def reshape(x, shape):
    x = as_tensor(x)
    original = x.shape

    def backward_fn(g):
        return (g.reshape(original),)
    return record('reshape', (x,), x.data.reshape(shape), backward_fn)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=axis))
    return record('concat', tuple(tensors), np.concatenate([t.data for t in tensors], axis=axis), backward_fn)


def sum(x):
    x = as_tensor(x)

    def backward_fn(g):
        return (np.broadcast_to(g, x.shape).astype(x.dtype),)
    return record('sum', (x,), np.asarray(x.data.sum(), dtype=x.dtype), backward_fn)


def mean(x):
    x = as_tensor(x)
    n = x.data.size

    def backward_fn(g):
        return (np.broadcast_to(g / n, x.shape).astype(x.dtype),)
    return record('mean', (x,), np.asarray(x.data.mean(), dtype=x.dtype), backward_fn)


def _stable_softmax(data, axis):
    shifted = data - data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=axis, keepdims=True)


def softmax(x, axis=-1):
    x = as_tensor(x)
    y = _stable_softmax(x.data, axis)

    def backward_fn(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)
    return record('softmax', (x,), y, backward_fn)


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - log_norm

    def backward_fn(g):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)
    return record('log_softmax', (x,), y, backward_fn)


def cross_entropy(logits, targets, pad_mask=None):
    """
    Mean over non-pad positions of -log softmax(logits)[t, y_t].
    pad_mask is True at padding positions; those contribute exactly zero,
    to the loss and to the gradient.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets)
    if logits.shape[:-1] != targets.shape:
        raise ShapeError(f'cross_entropy: logits {logits.shape} do not match targets {targets.shape}')
    vocab = logits.shape[-1]
    valid = np.ones(targets.shape, dtype=bool) if pad_mask is None else ~np.asarray(pad_mask, dtype=bool)
    if np.any((targets[valid] >= vocab) | (targets[valid] < 0)):
        raise IndexError(f'cross_entropy: target id out of range [0, {vocab})')
    support = int(valid.sum())
    if support == 0:
        raise ValueError('empty loss support')

    flat = logits.data.reshape(-1, vocab)
    flat_targets = np.where(valid, targets, 0).reshape(-1)
    flat_valid = valid.reshape(-1)
    rows = np.arange(flat.shape[0])

    shifted = flat - flat.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    nll = -log_probs[rows, flat_targets]
    loss = np.asarray((nll * flat_valid).sum() / support, dtype=logits.dtype)

    def backward_fn(g):
        grad = np.exp(log_probs)
        grad[rows, flat_targets] -= 1.0
        grad *= (flat_valid[:, None] * (g / support))
        return (grad.reshape(logits.shape).astype(logits.dtype, copy=False),)
    return record('cross_entropy', (logits,), loss, backward_fn)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize over the last axis, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    n = x.shape[-1]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise ShapeError(f'layer_norm: gain {gamma.shape}/bias {beta.shape} do not match {x.shape}')
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    gamma_data = gamma.data

    def backward_fn(g):
        gxhat = g * gamma_data
        gx = inv_std / n * (n * gxhat
                            - gxhat.sum(axis=-1, keepdims=True)
                            - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True))
        return (gx,
                (g * xhat).reshape(-1, n).sum(axis=0),
                g.reshape(-1, n).sum(axis=0))
    return record('layer_norm', (x, gamma, beta), xhat * gamma_data + beta.data, backward_fn)


def embedding_lookup(table, ids):
    """Rows of table at integer ids; gradient scatters back with accumulation."""
    table = as_tensor(table)
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f'embedding_lookup: id out of range [0, {table.shape[0]})')

    def backward_fn(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)
    return record('embedding', (table,), table.data[ids], backward_fn)


def dropout(x, rate, rng=None, training=True):
    """Inverted dropout; identity in eval mode. Randomness comes only from rng."""
    x = as_tensor(x)
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ValueError('dropout in training mode needs a random generator')
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / np.asarray(1.0 - rate, dtype=x.dtype)

    def backward_fn(g):
        return (g * keep,)
    return record('dropout', (x,), x.data * keep, backward_fn)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x):
    """tanh approximation of GELU."""
    x = as_tensor(x)
    data = x.data
    inner = _GELU_C * (data + 0.044715 * data ** 3)
    t = np.tanh(inner)

    def backward_fn(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * data ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * data * (1.0 - t ** 2) * d_inner),)
    return record('gelu', (x,), 0.5 * data * (1.0 + t), backward_fn)


def masked_fill(x, mask, value):
    """Replace entries where the constant boolean mask is True."""
    x = as_tensor(x)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)

    def backward_fn(g):
        return (np.where(mask, 0.0, g).astype(x.dtype, copy=False),)
    return record('masked_fill', (x,), np.where(mask, np.asarray(value, dtype=x.dtype), x.data), backward_fn)


def linear(x, weight, bias=None):
    """x[..., d_in] @ weight[d_in, d_out] (+ bias) via a 2-D matmul."""
    x = as_tensor(x)
    lead = x.shape[:-1]
    out = matmul(reshape(x, (-1, x.shape[-1])), weight)
    if bias is not None:
        out = add(out, bias)
    return reshape(out, lead + (weight.shape[-1],))
