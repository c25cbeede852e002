#!/bin/env python3
# -*- coding: utf-8 -*-
# training/evaluation.py

import logging
from collections import OrderedDict
from pathlib import Path

import numpy as np
from tqdm import tqdm

from corpus.batching import encode_sequence, make_batches
from corpus.tokenizer import detokenize, tokenize
from corpus.vocab import Vocab
from helpers.errors import DataError
from helpers.results import MetricsRow
from metrics.bleu import corpus_bleu
from metrics.distinct import distinct_report
from models.transformer import EVAL, ModelConfig, Seq2SeqTransformer
from tensorcore import ops
from tensorcore.tensor import Tensor, no_grad, set_default_dtype
from training.checkpoint import load_checkpoint


VOCAB_FILENAME = 'vocab.txt'


def model_from_checkpoint(ckpt):
    dtype = next(iter(ckpt.params.values())).dtype
    set_default_dtype(dtype)
    params = OrderedDict((k, Tensor(np.array(v, dtype=dtype), requires_grad=True, name=k))
                         for k, v in ckpt.params.items())
    return Seq2SeqTransformer(ModelConfig(**ckpt.model_config), params=params)


def load_vocab_for(ckpt, path, vocab_path=None):
    vocab_path = Path(vocab_path) if vocab_path else Path(path).parent / VOCAB_FILENAME
    vocab = Vocab.load(vocab_path)
    if vocab.fingerprint() != ckpt.vocab_hash:
        raise DataError(f'Vocabulary {vocab_path} does not match checkpoint {path} '
                        f'({vocab.fingerprint()[:12]} != {ckpt.vocab_hash[:12]})')
    return vocab


def reference_ids(pair, vocab, max_len):
    """Gold response as the model is trained to emit it, without EOS."""
    return encode_sequence(pair.response, vocab, max_len)[:-1]


def heldout_loss(model, vocab, pairs, batch_size):
    """Token-weighted teacher-forced cross-entropy, no dropout."""
    total, tokens = 0.0, 0
    with no_grad():
        for batch in make_batches(pairs, vocab, batch_size, model.config.max_len, seed=0, shuffle=False):
            logits = model.forward(batch, mode=EVAL)
            n = int((~batch.response_mask).sum())
            total += float(ops.cross_entropy(logits, batch.response, batch.response_mask).item()) * n
            tokens += n
    return total / tokens


def generate_all(model, vocab, pairs, batch_size, progress=False):
    candidates = []
    batches = make_batches(pairs, vocab, batch_size, model.config.max_len, seed=0, shuffle=False)
    total = (len(pairs) + batch_size - 1) // batch_size
    for batch in tqdm(batches, total=total, desc='generate', disable=not progress):
        candidates.extend(model.greedy_generate(batch.context, batch.context_mask))
    return candidates


def score(label, candidates, references, loss, step):
    bleu = corpus_bleu(candidates, references)
    distinct = distinct_report(candidates)
    logging.debug(f'{label}: precisions p1..p4 = {bleu.precision_1:.4f} {bleu.precision_2:.4f} '
                  f'{bleu.precision_3:.4f} {bleu.precision_4:.4f}')
    return MetricsRow(
        label=label,
        bleu_1=100.0 * bleu.bleu_1, bleu_2=100.0 * bleu.bleu_2,
        bleu_3=100.0 * bleu.bleu_3, bleu_4=100.0 * bleu.bleu_4,
        distinct_1=100.0 * distinct.distinct_1, distinct_2=100.0 * distinct.distinct_2,
        distinct_3=100.0 * distinct.distinct_3,
        loss=float(loss), step=int(step),
    )


def evaluate(model, vocab, pairs, label='eval', step=0, batch_size=64, progress=False):
    """Greedy-decode every context and score the generations against the gold responses."""
    if not pairs:
        raise DataError('Evaluation set is empty')
    candidates = generate_all(model, vocab, pairs, batch_size, progress)
    references = [reference_ids(p, vocab, model.config.max_len) for p in pairs]
    loss = heldout_loss(model, vocab, pairs, batch_size)
    row = score(label, candidates, references, loss, step)
    logging.info(f'Evaluation {label} step {step}: BLEU-1..4 {row.bleu_1:.2f}/{row.bleu_2:.2f}/'
                 f'{row.bleu_3:.2f}/{row.bleu_4:.2f} Distinct-1..3 {row.distinct_1:.2f}/'
                 f'{row.distinct_2:.2f}/{row.distinct_3:.2f} loss {row.loss:.4f}')
    return row


def evaluate_checkpoint(path, pairs, vocab_path=None, label=None, batch_size=64, progress=False):
    ckpt = load_checkpoint(path)
    vocab = load_vocab_for(ckpt, path, vocab_path)
    model = model_from_checkpoint(ckpt)
    label = label or ckpt.train_config.get('label') or Path(path).stem
    return evaluate(model, vocab, pairs, label=label, step=ckpt.step, batch_size=batch_size, progress=progress)


def generate(path, prompt, vocab_path=None):
    """Greedy response to one prompt; words outside the vocabulary become <unk>."""
    tokens = tokenize(prompt)
    if not tokens:
        raise DataError('Prompt is empty after tokenization')
    ckpt = load_checkpoint(path)
    vocab = load_vocab_for(ckpt, path, vocab_path)
    model = model_from_checkpoint(ckpt)
    src = np.asarray([encode_sequence(tokens, vocab, model.config.max_len)], dtype=np.int64)
    output = model.greedy_generate(src)[0]
    return detokenize(vocab.decode(output))
