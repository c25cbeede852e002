#!/bin/env python3
# -*- coding: utf-8 -*-
# helpers/errors.py
"""
Exceptions shared by every package. biss.py maps the three families
(config, data, numeric) to process exit codes.
"""


class BissError(Exception):
    """Base of all errors the command line knows how to report."""
    exit_code = 1


class ConfigError(BissError):
    exit_code = 2


class DataError(BissError):
    exit_code = 3


class NumericError(BissError):
    """
    Non-finite loss or gradient during training.
    Carries the diagnostics needed to find the offending batch.
    """
    exit_code = 4

    def __init__(self, message, step=None, batch_index=None, max_abs_grad=None):
        super().__init__(message)
        self.step = step
        self.batch_index = batch_index
        self.max_abs_grad = max_abs_grad

    def __str__(self):
        base = super().__str__()
        return f'{base} (step={self.step}, batch={self.batch_index}, max|grad|={self.max_abs_grad})'


class ShapeError(ValueError):
    pass


class GraphError(RuntimeError):
    pass


class EmptySentenceError(ValueError):
    pass


class DegenerateEmbeddingError(ValueError):
    pass
