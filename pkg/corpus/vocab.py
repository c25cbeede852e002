#!/bin/env python3
# -*- coding: utf-8 -*-
# corpus/vocab.py

import hashlib
import logging
from collections import Counter
from pathlib import Path

from helpers.errors import DataError


PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIAL_TOKENS = ['<pad>', '<bos>', '<eos>', '<unk>']
N_SPECIAL = len(SPECIAL_TOKENS)


class Vocab:
    """
    Bijective token <-> id map. Ids 0..3 are PAD, BOS, EOS, UNK and are
    never given to corpus tokens.
    """
    def __init__(self, tokens):
        self._id_to_token = list(SPECIAL_TOKENS)
        self._token_to_id = {}
        for token in tokens:
            if token in self._token_to_id or token in SPECIAL_TOKENS:
                raise DataError(f'Duplicate vocabulary token {token!r}')
            self._token_to_id[token] = len(self._id_to_token)
            self._id_to_token.append(token)
        if len(self._id_to_token) <= N_SPECIAL:
            raise DataError('Vocabulary needs at least one corpus token')
        logging.info(f'Vocab created. size: {len(self)}')

    def __len__(self):
        return len(self._id_to_token)

    def __contains__(self, token):
        return token in self._token_to_id

    @property
    def corpus_tokens(self):
        return self._id_to_token[N_SPECIAL:]

    def token_id(self, token):
        return self._token_to_id.get(token, UNK)

    def token(self, token_id):
        return self._id_to_token[token_id]

    def encode(self, tokens):
        return [self._token_to_id.get(t, UNK) for t in tokens]

    def decode(self, ids, strip_special=True):
        """ids -> tokens; stops at EOS and drops PAD/BOS when strip_special."""
        tokens = []
        for i in ids:
            i = int(i)
            if strip_special:
                if i == EOS:
                    break
                if i in (PAD, BOS):
                    continue
            tokens.append(self._id_to_token[i])
        return tokens

    def fingerprint(self):
        """sha256 over the ordered token list; checkpoints store it to detect mismatch."""
        digest = hashlib.sha256()
        for token in self._id_to_token:
            digest.update(token.encode('utf-8'))
            digest.update(b'\n')
        return digest.hexdigest()

    def save(self, path):
        """One corpus token per line; line number = id - 4."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            for token in self.corpus_tokens:
                f.write(token + '\n')

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise DataError(f'Vocabulary file {path} not found')
        with open(path, encoding='utf-8') as f:
            tokens = [line.rstrip('\n') for line in f]
        return cls([t for t in tokens if t])


def build_vocab(pairs, min_freq=1, max_size=None):
    """
    Tokens ordered by (frequency desc, first occurrence asc).
    max_size counts the reserved ids, so max_size=5 keeps one corpus token.
    """
    counts = Counter()
    first_seen = {}
    position = 0
    for pair in pairs:
        for seq in (pair.context, pair.response):
            for token in seq:
                counts[token] += 1
                if token not in first_seen:
                    first_seen[token] = position
                position += 1
    if not counts:
        raise DataError('Cannot build a vocabulary from an empty corpus')

    ordered = sorted((t for t, c in counts.items() if c >= min_freq),
                     key=lambda t: (-counts[t], first_seen[t]))
    if max_size is not None:
        if max_size < N_SPECIAL + 1:
            raise DataError(f'max_size must be at least {N_SPECIAL + 1}, got {max_size}')
        ordered = ordered[:max_size - N_SPECIAL]
    return Vocab(ordered)
