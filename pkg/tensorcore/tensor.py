#!/bin/env python3
# -*- coding: utf-8 -*-
# tensorcore/tensor.py
"""
Dense tensor with reverse-mode automatic differentiation.

Operations are recorded on the active Graph (a tape) only when a graph is
open and at least one input requires a gradient. Outside a graph every op
is a plain numpy computation, which is how the no-gradient passes run.
"""

import itertools
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from helpers.errors import GraphError


_DEFAULT_DTYPE = np.float32


def set_default_dtype(dtype):
    """float32 for training runs, float64 for gradient checks and oracle runs."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f'Unsupported dtype {dtype}')
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


class Tensor:
    """
    n-dimensional real array with an optional gradient.
    data is never mutated by an op; grad is filled during backward.
    """
    __slots__ = ('data', 'requires_grad', 'grad', 'node', 'name')

    def __init__(self, data, requires_grad=False, name=None):
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(_DEFAULT_DTYPE)
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node: Optional['Node'] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        req = ', requires_grad=True' if self.requires_grad else ''
        nm = f', name={self.name}' if self.name else ''
        return f'Tensor(shape={self.data.shape}, dtype={self.data.dtype}{req}{nm})'

    # Operator sugar. Implementations live in tensorcore.ops.
    def __add__(self, other):
        from tensorcore import ops
        return ops.add(self, other)

    def __mul__(self, other):
        from tensorcore import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        from tensorcore import ops
        return ops.matmul(self, other)


@dataclass
class Node:
    """One recorded operation: op kind, inputs, and the closure holding saved activations."""
    id: int
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward_fn: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]]
    graph: 'Graph'

    @property
    def input_ids(self):
        return tuple(t.node.id if t.node is not None else None for t in self.inputs)


@dataclass
class Graph:
    """
    Append-only record of operations for one forward pass.
    Node ids increase in creation order, so every node's inputs precede it.
    """
    nodes: List[Node] = field(default_factory=list)
    consumed: bool = False

    _ids = itertools.count()

    def __enter__(self):
        _graph_stack.append(self)
        return self

    def __exit__(self, *exc):
        _graph_stack.pop()
        return False

    def record(self, op, inputs, output, backward_fn):
        node = Node(next(Graph._ids), op, tuple(inputs), output, backward_fn, self)
        self.nodes.append(node)
        output.node = node
        output.requires_grad = True
        return output

    def reset(self):
        for node in self.nodes:
            node.output.node = None
        self.nodes = []
        self.consumed = False

    def backward(self, loss: Tensor):
        if self.consumed:
            raise GraphError('backward already ran on this graph; reset it before running again')
        grads = {id(loss): np.ones_like(loss.data)}
        visited = 0
        # Reverse creation order is a valid reverse topological order.
        for node in reversed(self.nodes):
            out_grad = grads.pop(id(node.output), None)
            if out_grad is None:
                continue
            visited += 1
            node.output.grad = out_grad if node.output.grad is None else node.output.grad + out_grad
            input_grads = node.backward_fn(out_grad)
            for tensor, grad in zip(node.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor.node is not None and tensor.node.graph is self:
                    key = id(tensor)
                    grads[key] = grad if key not in grads else grads[key] + grad
                else:
                    # Leaf: parameters and user inputs accumulate across graphs.
                    tensor.grad = grad.astype(tensor.data.dtype, copy=False) if tensor.grad is None else tensor.grad + grad
        for node in self.nodes:
            node.backward_fn = None
        self.consumed = True
        return visited


_graph_stack: List[Graph] = []
_recording_paused = [0]


def active_graph() -> Optional[Graph]:
    if _recording_paused[0] or not _graph_stack:
        return None
    return _graph_stack[-1]


@contextmanager
def no_grad():
    _recording_paused[0] += 1
    try:
        yield
    finally:
        _recording_paused[0] -= 1


def record(op, inputs, out_data, backward_fn):
    """Wrap out_data in a Tensor and, if needed, put it on the active graph."""
    out = Tensor(out_data)
    graph = active_graph()
    if graph is not None and any(t.requires_grad for t in inputs):
        graph.record(op, inputs, out, backward_fn)
    return out


def backward(loss: Tensor):
    """Populate .grad on every requires_grad tensor reachable from the scalar loss."""
    if loss.data.size != 1:
        raise GraphError(f'backward needs a scalar loss, got shape {loss.shape}')
    if loss.node is None:
        raise GraphError('loss was not produced on a recorded graph')
    loss.node.graph.backward(loss)


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=_DEFAULT_DTYPE))
