#!/bin/env python3
# -*- coding: utf-8 -*-
# training/optimizer.py

import numpy as np


class Adam:
    """
    Adam with linear learning-rate warmup and optional global-norm clipping.
    Moment buffers share the parameter dtype so checkpoints restore bitwise.
    """
    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.98, epsilon=1e-9,
                 warmup_steps=400, clip_norm=None):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.warmup_steps = warmup_steps
        self.clip_norm = clip_norm
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    @classmethod
    def from_config(cls, params, config):
        return cls(params, config.learning_rate, config.beta1, config.beta2, config.epsilon,
                   config.warmup_steps, config.clip_norm)

    def current_lr(self):
        if self.warmup_steps and self.step_count < self.warmup_steps:
            return self.learning_rate * (self.step_count + 1) / self.warmup_steps
        return self.learning_rate

    def grad_norm(self):
        total = 0.0
        for p in self.params.values():
            if p.grad is not None:
                total += float(np.sum(p.grad.astype(np.float64) ** 2))
        return total ** 0.5

    def step(self):
        lr = self.current_lr()
        scale = 1.0
        if self.clip_norm:
            norm = self.grad_norm()
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
        self.step_count += 1
        t = self.step_count
        correction1 = 1.0 - self.beta1 ** t
        correction2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            dtype = p.data.dtype
            g = p.grad.astype(dtype, copy=False) * dtype.type(scale)
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            update = lr * (m / correction1) / (np.sqrt(v / correction2) + self.epsilon)
            p.data = (p.data - update).astype(dtype, copy=False)
        return lr

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_dict(self):
        return {'step_count': self.step_count, 'm': dict(self.m), 'v': dict(self.v)}

    def load_state_dict(self, state):
        self.step_count = int(state['step_count'])
        for name in self.params:
            self.m[name] = np.array(state['m'][name], dtype=self.params[name].data.dtype)
            self.v[name] = np.array(state['v'][name], dtype=self.params[name].data.dtype)
