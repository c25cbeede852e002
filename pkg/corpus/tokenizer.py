#!/bin/env python3
# -*- coding: utf-8 -*-
# corpus/tokenizer.py

import re


# A word run, or any single non-space symbol as its own token
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text):
    """
    Lowercase, split punctuation off as standalone tokens, split on whitespace.
    "Hello, world!" -> ['hello', ',', 'world', '!']
    """
    if not text:
        return []
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens):
    return ' '.join(tokens)
