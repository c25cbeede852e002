#!/bin/env python3
# -*- coding: utf-8 -*-
# metrics/bleu.py
"""
Unsmoothed BLEU: per-sentence i-gram scores for the sentence-level indicator,
corpus BLEU-1..4 for evaluation.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass


MAX_ORDER = 4


@dataclass(frozen=True)
class BleuReport:
    """Cumulative corpus BLEU-n in [0,1]; precision_n are the bare n-gram precisions."""
    bleu_1: float
    bleu_2: float
    bleu_3: float
    bleu_4: float
    precision_1: float = 0.0
    precision_2: float = 0.0
    precision_3: float = 0.0
    precision_4: float = 0.0

    def bleu(self, n):
        return getattr(self, f'bleu_{n}')


def ngrams(seq, n):
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def clipped_matches(candidate, reference, n):
    """(matched n-grams clipped by reference counts, total candidate n-grams)"""
    cand = ngrams(candidate, n)
    ref = ngrams(reference, n)
    matched = sum(min(count, ref[gram]) for gram, count in cand.items())
    return matched, sum(cand.values())


def brevity_penalty(candidate_len, reference_len):
    if candidate_len == 0:
        return 0.0
    return math.exp(min(0.0, 1.0 - reference_len / candidate_len))


def sentence_bleu_i(candidate, reference, i):
    """
    Clipped i-gram precision times the brevity penalty, no smoothing.
    0 when the candidate has no i-grams or nothing matches.
    """
    if not 1 <= i <= MAX_ORDER:
        raise ValueError(f'n-gram order must be in 1..{MAX_ORDER}, got {i}')
    matched, total = clipped_matches(candidate, reference, i)
    if total == 0 or matched == 0:
        return 0.0
    return matched / total * brevity_penalty(len(candidate), len(reference))


def sli_bleu(y_star, y, m, mode='sum'):
    """
    Sentence score S = (sum of bleu-1..4) / m.
    mode='mean' averages the four orders before dividing by m.
    """
    if m <= 0:
        raise ValueError(f'm must be positive, got {m}')
    total = sum(sentence_bleu_i(y_star, y, i) for i in range(1, MAX_ORDER + 1))
    if mode == 'mean':
        total /= MAX_ORDER
    elif mode != 'sum':
        raise ValueError(f'Unknown sentence BLEU mode {mode!r}')
    return total / m


def corpus_bleu(candidates, references):
    """
    Corpus-level clipped precisions with one corpus-level brevity penalty.
    BLEU-n = BP * geometric mean of p_1..p_n; 0 if any of them is 0.
    """
    if len(candidates) != len(references):
        raise ValueError(f'{len(candidates)} candidates but {len(references)} references')
    if not candidates:
        raise ValueError('corpus_bleu needs a non-empty corpus')

    max_order = MAX_ORDER
    matched = [0] * (max_order + 1)
    total = [0] * (max_order + 1)
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            m, t = clipped_matches(cand, ref, n)
            matched[n] += m
            total[n] += t

    precisions = [matched[n] / total[n] if total[n] else 0.0 for n in range(1, max_order + 1)]
    bp = brevity_penalty(cand_len, ref_len)
    scores = []
    log_sum = 0.0
    for n, p in enumerate(precisions, 1):
        if p == 0.0 or math.isinf(log_sum):
            log_sum = -math.inf
            scores.append(0.0)
            continue
        log_sum += math.log(p)
        scores.append(bp * math.exp(log_sum / n))
    return BleuReport(*scores, *precisions)


# Test main
def main():
    logging.basicConfig(
            format='%(asctime)s %(levelname)s %(message)s',
            level=logging.DEBUG
            )
    candidate = 'the the the'.split()
    reference = 'the cat sat'.split()
    logging.info(f'bleu-1: {sentence_bleu_i(candidate, reference, 1):.4f}')
    logging.info(f'SLI (m=0.8): {sli_bleu(candidate, reference, 0.8):.5f}')
    logging.info(corpus_bleu([reference], [reference]))


if __name__ == "__main__":
    # execute only if run as a script
    main()
