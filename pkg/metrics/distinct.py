#!/bin/env python3
# -*- coding: utf-8 -*-
# metrics/distinct.py

from dataclasses import dataclass


@dataclass(frozen=True)
class DistinctReport:
    distinct_1: float
    distinct_2: float
    distinct_3: float


def distinct_n(candidates, n):
    """Unique n-grams over total n-grams across the whole generated corpus."""
    if n < 1:
        raise ValueError(f'n must be >= 1, got {n}')
    seen = set()
    total = 0
    for cand in candidates:
        for i in range(len(cand) - n + 1):
            seen.add(tuple(cand[i:i + n]))
            total += 1
    return len(seen) / total if total else 0.0


def distinct_report(candidates):
    return DistinctReport(*(distinct_n(candidates, n) for n in (1, 2, 3)))
