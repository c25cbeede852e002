#!/bin/env python3
# -*- coding: utf-8 -*-
# tensorcore/gradcheck.py
"""
Central finite-difference gradient checking. Always run in float64.
"""

import numpy as np

from tensorcore.tensor import Graph, Tensor, backward, no_grad


def analytic_gradients(fn, inputs):
    """Run fn(*inputs) on a fresh graph and return the input gradients."""
    for t in inputs:
        t.grad = None
        t.requires_grad = True
    with Graph():
        loss = fn(*inputs)
        backward(loss)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in inputs]


def numerical_gradient(fn, inputs, index, step=1e-4, coords=None):
    """
    d fn / d inputs[index] by central differences.
    coords limits the check to a subset of flat positions.
    """
    target = inputs[index]
    target.data = np.ascontiguousarray(target.data)
    flat = target.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    positions = range(flat.size) if coords is None else coords
    for k in positions:
        saved = flat[k]
        flat[k] = saved + step
        plus = float(fn(*inputs).data)
        flat[k] = saved - step
        minus = float(fn(*inputs).data)
        flat[k] = saved
        grad[k] = (plus - minus) / (2 * step)
    return grad.reshape(target.shape)


def max_relative_error(analytic, numeric, floor=1e-3):
    """
    max |a - n| / max(|a|, |n|, floor).
    The floor turns the comparison absolute for gradients near zero.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradcheck(fn, inputs, step=1e-4, coords_per_input=None, rng=None):
    """
    Compare analytic and numerical gradients of the scalar fn for every input.
    Returns the worst relative error found.
    """
    inputs = [t if isinstance(t, Tensor) else Tensor(np.asarray(t, dtype=np.float64)) for t in inputs]
    for t in inputs:
        if t.data.dtype != np.float64:
            raise ValueError('gradcheck needs float64 inputs')
    analytic = analytic_gradients(fn, inputs)
    worst = 0.0
    for index, t in enumerate(inputs):
        coords = None
        if coords_per_input is not None and t.data.size > coords_per_input:
            rng = rng if rng is not None else np.random.default_rng(0)
            coords = rng.choice(t.data.size, size=coords_per_input, replace=False)
        numeric = numerical_gradient(lambda *xs: _no_record(fn, xs), inputs, index, step=step, coords=coords)
        a = analytic[index].reshape(-1)
        n = numeric.reshape(-1)
        if coords is not None:
            a, n = a[coords], n[coords]
        worst = max(worst, max_relative_error(a, n))
    return worst


def _no_record(fn, xs):
    with no_grad():
        return fn(*xs)
