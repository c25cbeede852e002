#!/bin/env python3
# -*- coding: utf-8 -*-
# training/ablation.py
"""
Train one model per strategy variant from the same seed and data order,
then tabulate the held-out metrics side by side.
"""

import copy
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from tqdm import tqdm

from helpers.errors import ConfigError
from helpers.results import write_csv, write_table
from samplers.strategies import from_dict, resolve_variant, variant_label
from training.trainer import train


def _resolve(entry):
    """A variant name (optionally with :key=value overrides) or a {"type": ...} strategy object."""
    if isinstance(entry, dict):
        data = dict(entry)
        label = data.pop('label', None)
        strategy = from_dict(data)
        return label or variant_label(strategy), strategy
    return resolve_variant(entry)


def _dir_name(label):
    return re.sub(r'[^\w.=-]+', '_', label).strip('_')


def variant_configs(base_config, variants):
    if len(variants) < 2:
        raise ConfigError(f'ablate needs at least 2 variants, got {len(variants)}')
    if not (base_config.corpus.valid or base_config.corpus.test):
        raise ConfigError('ablate needs a held-out split (corpus.valid or corpus.test)')
    root = Path(base_config.checkpoint_dir)
    configs = []
    for entry in variants:
        label, strategy = _resolve(entry)
        config = copy.deepcopy(base_config)
        config.label = label
        config.strategy = strategy
        config.checkpoint_dir = str(root / _dir_name(label))
        configs.append(config)
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels):
        raise ConfigError(f'Duplicate variants in {labels}')
    return configs


def _run(config):
    return train(config).final_metrics


def ablate(base_config, variants, jobs=1):
    """Rows in the order the variants were given. Writes ablation.csv and ablation.txt."""
    configs = variant_configs(base_config, variants)
    logging.info(f'Ablation over {len(configs)} variants, seed {base_config.seed}, jobs {jobs}')
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(tqdm(pool.map(_run, configs), total=len(configs), desc='ablate'))
    else:
        rows = [_run(c) for c in tqdm(configs, desc='ablate')]

    root = Path(base_config.checkpoint_dir)
    write_csv(rows, root / 'ablation.csv')
    table = write_table(rows, root / 'ablation.txt')
    logging.info(f'Ablation table written to {table}')
    return rows
