#!/bin/env python3
# -*- coding: utf-8 -*-
# training/trainer.py
"""
Training loop. Given (seed, config, corpus) every run is bitwise
reproducible, and a run resumed from a checkpoint continues the exact
loss trace of the uninterrupted one.

Randomness is split into independent streams:
    data order      default_rng([seed, epoch])
    mixing          default_rng([seed, epoch, batch index, row])
    dropout         one trainer-owned generator, saved in every checkpoint
    initialization  seed
"""

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from corpus.batching import count_batches, make_batches
from corpus.dialogue import load_pairs
from corpus.vocab import build_vocab
from helpers.config import save_config
from helpers.errors import ConfigError, DataError, NumericError
from helpers.influxdbclient import make_sink
from helpers.results import MetricsRow, read_csv, write_csv
from models.transformer import ModelConfig, Seq2SeqTransformer
from samplers.two_pass import StepContext, two_pass_training_step
from tensorcore.tensor import Graph, set_default_dtype
from training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from training.evaluation import VOCAB_FILENAME, evaluate
from training.optimizer import Adam


DROPOUT_STREAM = 1
LOSS_COLUMNS = ['step', 'epoch', 'batch', 'loss', 'lr', 'gold', 'pred', 'rand', 'mean_p', 'mean_S']


@dataclass
class TrainResult:
    checkpoint: Path
    losses: List[float] = field(default_factory=list)
    metrics: List[MetricsRow] = field(default_factory=list)
    final_metrics: Optional[MetricsRow] = None


def run_label(config):
    return config.label or type(config.strategy).__name__


def _load_split(config, split):
    path = getattr(config.corpus, split)
    if not path:
        return []
    return load_pairs(path, delimiter=config.corpus.delimiter, fmt=config.corpus.format)


class Trainer:
    def __init__(self, config, resume=None):
        self.config = config.validate()
        set_default_dtype(config.dtype)
        self.label = run_label(config)
        self.out_dir = Path(config.checkpoint_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

        self.train_pairs = _load_split(config, 'train')
        if not self.train_pairs:
            raise DataError(f'No training pairs in {config.corpus.train}')
        self.valid_pairs = _load_split(config, 'valid')
        self.test_pairs = _load_split(config, 'test')
        self.vocab = build_vocab(self.train_pairs, config.corpus.min_freq, config.corpus.max_size)

        model_config = ModelConfig(vocab_size=len(self.vocab), **asdict(config.model))
        self.model = Seq2SeqTransformer(model_config, seed=config.seed)
        self.optimizer = Adam.from_config(self.model.params, config.optimizer)
        self.dropout_rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(DROPOUT_STREAM,)))
        self.sink = make_sink(config.influxdb, self.label)

        self.step = 0
        self.epoch = 0
        self.batch_in_epoch = 0
        self.losses = []
        self.metrics = []
        self.last_checkpoint = None
        if resume is not None:
            self.restore(resume)
            self._truncate_logs(self.step)
        else:
            self._reset_log('losses.csv', LOSS_COLUMNS)
            (self.out_dir / 'metrics.csv').unlink(missing_ok=True)
        self.vocab.save(self.out_dir / VOCAB_FILENAME)
        save_config(config, self.out_dir / 'config.json')
        logging.info(f'Trainer created. {self.label}: {len(self.train_pairs)} train pairs, '
                     f'vocab {len(self.vocab)}, {self.model.n_parameters()} parameters')

    # -------------------------
    # Checkpoints
    def checkpoint(self):
        return Checkpoint(
            model_config=self.model.config.to_dict(),
            params=self.model.state_dict(),
            optimizer_state=self.optimizer.state_dict(),
            rng_state=self.dropout_rng.bit_generator.state,
            step=self.step,
            epoch=self.epoch,
            batch_in_epoch=self.batch_in_epoch,
            vocab_hash=self.vocab.fingerprint(),
            train_config=self.config.to_dict(),
        )

    def save(self, name):
        ckpt = self.checkpoint()
        path = save_checkpoint(ckpt, self.out_dir / name)
        save_checkpoint(ckpt, self.out_dir / 'last.ckpt')
        self.last_checkpoint = path
        return path

    def restore(self, path):
        ckpt = load_checkpoint(path)
        if ckpt.vocab_hash != self.vocab.fingerprint():
            raise DataError(f'Checkpoint {path} was trained on a different vocabulary')
        if ckpt.model_config != self.model.config.to_dict():
            raise ConfigError(f'Checkpoint {path} model {ckpt.model_config} does not match '
                              f'configured model {self.model.config.to_dict()}')
        self.model.load_state_dict(ckpt.params)
        self.optimizer.load_state_dict(ckpt.optimizer_state)
        self.dropout_rng.bit_generator.state = ckpt.rng_state
        self.step = ckpt.step
        self.epoch = ckpt.epoch
        self.batch_in_epoch = ckpt.batch_in_epoch
        self.last_checkpoint = Path(path)
        logging.info(f'Resumed from {path}: step {self.step}, epoch {self.epoch}, batch {self.batch_in_epoch}')

    # -------------------------
    # Logs
    def _reset_log(self, name, columns):
        with open(self.out_dir / name, 'w', encoding='utf-8', newline='') as f:
            csv.writer(f).writerow(columns)

    def _truncate_logs(self, step):
        """Drop log rows past step, so a run resumed in its own directory logs every step once."""
        losses = self.out_dir / 'losses.csv'
        if not losses.exists() or losses.stat().st_size == 0:
            self._reset_log('losses.csv', LOSS_COLUMNS)
        else:
            with open(losses, encoding='utf-8', newline='') as f:
                rows = list(csv.reader(f))
            with open(losses, 'w', encoding='utf-8', newline='') as f:
                writer = csv.writer(f)
                writer.writerow(LOSS_COLUMNS)
                writer.writerows(r for r in rows[1:] if r and int(r[0]) <= step)
        metrics = self.out_dir / 'metrics.csv'
        if metrics.exists() and metrics.stat().st_size > 0:
            write_csv([r for r in read_csv(metrics) if r.step <= step], metrics)

    def _log_loss(self, batch_index, loss, lr, stats):
        with open(self.out_dir / 'losses.csv', 'a', encoding='utf-8', newline='') as f:
            csv.writer(f).writerow([self.step, self.epoch, batch_index, repr(loss), repr(lr),
                                    stats['gold'], stats['pred'], stats['rand'], stats['mean_p'], stats['mean_S']])

    def _record_metrics(self, row):
        self.metrics.append(row)
        write_csv([row], self.out_dir / 'metrics.csv', append=True)
        self.sink.write('metrics', {k: v for k, v in asdict(row).items() if k not in ('label', 'step')}, row.step)

    # -------------------------
    # Steps
    def _check_finite(self, loss, batch_index):
        grads = [p.grad for p in self.model.parameters() if p.grad is not None]
        finite = np.isfinite(loss) and all(np.isfinite(g).all() for g in grads)
        if finite:
            return
        max_abs_grad = max((float(np.max(np.abs(g))) for g in grads), default=0.0)
        raise NumericError(f'Non-finite loss or gradient ({loss})', step=self.step,
                           batch_index=batch_index, max_abs_grad=max_abs_grad)

    def train_step(self, batch):
        ctx = StepContext(seed=self.config.seed, epoch=self.epoch, step=self.step,
                          batch_index=batch.index, dropout_rng=self.dropout_rng)
        with Graph() as graph:
            result = two_pass_training_step(batch, self.model, self.config.strategy, ctx)
            graph.backward(result.loss)
        loss = float(result.loss.item())
        self._check_finite(loss, batch.index)
        lr = self.optimizer.step()
        self.optimizer.zero_grad()
        self.step += 1
        self.batch_in_epoch = batch.index + 1
        self.losses.append(loss)
        self._log_loss(batch.index, loss, lr, result.stats)
        self.sink.write('train', {'loss': loss, 'lr': lr, **result.stats}, self.step)
        logging.debug(f'step {self.step} epoch {self.epoch} batch {batch.index}: loss {loss:.6f} '
                      f'gold/pred/rand {result.stats["gold"]:.3f}/{result.stats["pred"]:.3f}/{result.stats["rand"]:.3f}')
        return loss

    def train(self):
        config = self.config
        n_batches = count_batches(len(self.train_pairs), config.batch_size)
        for epoch in range(self.epoch, config.epochs):
            self.epoch = epoch
            skip = self.batch_in_epoch
            epoch_losses = []
            batches = make_batches(self.train_pairs, self.vocab, config.batch_size,
                                   self.model.config.max_len, seed=[config.seed, epoch])
            for batch in batches:
                if batch.index < skip:
                    continue
                epoch_losses.append(self.train_step(batch))
                if config.eval_every and self.step % config.eval_every == 0 and self.valid_pairs:
                    self._record_metrics(self.evaluate(self.valid_pairs))
                if config.checkpoint_every and self.step % config.checkpoint_every == 0:
                    self.save(f'step_{self.step:06d}.ckpt')
            if epoch_losses:
                logging.info(f'{self.label} epoch {epoch + 1}/{config.epochs}: '
                             f'mean loss {np.mean(epoch_losses):.4f} over {len(epoch_losses)}/{n_batches} batches')
            self.epoch = epoch + 1
            self.batch_in_epoch = 0
            self.save(f'epoch_{epoch + 1:03d}.ckpt')

        final = None
        heldout = self.test_pairs or self.valid_pairs
        if heldout:
            final = self.evaluate(heldout)
            self._record_metrics(final)
        if self.last_checkpoint is None:
            self.save('last.ckpt')
        return TrainResult(checkpoint=self.last_checkpoint, losses=list(self.losses),
                           metrics=list(self.metrics), final_metrics=final)

    def evaluate(self, pairs):
        return evaluate(self.model, self.vocab, pairs, label=self.label, step=self.step,
                        batch_size=self.config.eval_batch_size)


def train(config, resume=None):
    return Trainer(config, resume=resume).train()
