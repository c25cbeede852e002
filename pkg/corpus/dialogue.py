#!/bin/env python3
# -*- coding: utf-8 -*-
# corpus/dialogue.py
"""
Multi-turn dialogue files -> single-turn (context, response) pairs.

Text format: one dialogue per line, utterances separated by '__eou__'.
JSON-lines format: one object per line with an "utterances" list.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List

from corpus.tokenizer import tokenize
from helpers.errors import DataError


DEFAULT_DELIMITER = '__eou__'


@dataclass(frozen=True)
class DialoguePair:
    context: List[str]
    response: List[str]


def split_dialogues(dialogues):
    """
    (u_1, ..., u_n) -> [(u_1, u_2), ..., (u_{n-1}, u_n)], order preserved.
    Single-utterance dialogues are skipped and counted.
    """
    pairs = []
    skipped = 0
    for utterances in dialogues:
        if len(utterances) < 2:
            skipped += 1
            continue
        for context, response in zip(utterances[:-1], utterances[1:]):
            pairs.append(DialoguePair(list(context), list(response)))
    if skipped:
        logging.warning(f'Skipped {skipped} dialogue(s) with fewer than 2 utterances')
    return pairs


def read_dialogues(path, delimiter=DEFAULT_DELIMITER, fmt=None):
    """Raw utterance strings per dialogue. fmt is 'eou' or 'jsonl' (guessed from suffix)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f'Corpus file {path} not found')
    if fmt is None:
        fmt = 'jsonl' if path.suffix in ('.jsonl', '.json') else 'eou'

    dialogues = []
    with open(path, encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if fmt == 'jsonl':
                try:
                    utterances = json.loads(line)['utterances']
                except (ValueError, KeyError, TypeError) as e:
                    raise DataError(f'{path}:{line_no}: bad dialogue record ({e})') from e
            elif fmt == 'eou':
                utterances = line.split(delimiter)
            else:
                raise DataError(f'Unknown corpus format {fmt!r}')
            dialogues.append([u.strip() for u in utterances if u.strip()])
    logging.info(f'Read {len(dialogues)} dialogues from {path}')
    return dialogues


def load_pairs(path, delimiter=DEFAULT_DELIMITER, fmt=None):
    """Read, tokenize and split one corpus file."""
    dialogues = read_dialogues(path, delimiter=delimiter, fmt=fmt)
    tokenized = [[t for t in (tokenize(u) for u in d) if t] for d in dialogues]
    pairs = split_dialogues(tokenized)
    logging.info(f'{path}: {len(pairs)} context-response pairs')
    return pairs


def write_dialogues(dialogues, path, delimiter=DEFAULT_DELIMITER):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for utterances in dialogues:
            f.write(f' {delimiter} '.join(utterances) + f' {delimiter}\n')
