#!/bin/env python3
# -*- coding: utf-8 -*-
# corpus/synthetic.py
"""
Noisy-copy dialogue corpus: every reply repeats the previous utterance with
a few words swapped at random. Small enough to train on a desktop CPU and
structured enough that exposure bias shows up at decode time.
"""

import logging

import numpy as np

from corpus.dialogue import write_dialogues


def make_words(n_words):
    return [f'w{i}' for i in range(n_words)]


def make_noisy_copy_dialogues(n_dialogues, turns=3, n_words=46, min_len=3, max_len=12,
                              noise=0.1, seed=0):
    if turns < 2:
        raise ValueError('A dialogue needs at least 2 turns')
    rng = np.random.default_rng(seed)
    words = make_words(n_words)
    dialogues = []
    for _ in range(n_dialogues):
        length = int(rng.integers(min_len, max_len + 1))
        utterance = [words[i] for i in rng.integers(0, n_words, size=length)]
        dialogue = [utterance]
        for _ in range(turns - 1):
            flips = rng.random(len(utterance)) < noise
            replacements = rng.integers(0, n_words, size=len(utterance))
            utterance = [words[r] if f else w for w, f, r in zip(utterance, flips, replacements)]
            dialogue.append(utterance)
        dialogues.append([' '.join(u) for u in dialogue])
    return dialogues


def write_noisy_copy_corpus(out_dir, n_train_pairs=2000, n_eval_pairs=200, turns=3,
                            n_words=46, min_len=3, max_len=12, noise=0.1, seed=0):
    """Write train.txt / valid.txt / test.txt under out_dir."""
    per_dialogue = turns - 1
    sizes = {'train': n_train_pairs, 'valid': n_eval_pairs, 'test': n_eval_pairs}
    paths = {}
    for offset, (split, n_pairs) in enumerate(sizes.items()):
        n_dialogues = (n_pairs + per_dialogue - 1) // per_dialogue
        dialogues = make_noisy_copy_dialogues(n_dialogues, turns=turns, n_words=n_words,
                                              min_len=min_len, max_len=max_len, noise=noise,
                                              seed=[seed, offset])
        paths[split] = f'{out_dir}/{split}.txt'
        write_dialogues(dialogues, paths[split])
        logging.info(f'Wrote {n_dialogues} {split} dialogues to {paths[split]}')
    return paths
