#!/bin/env python3
# -*- coding: utf-8 -*-
# training/checkpoint.py
"""
Versioned binary checkpoints.

    magic  b'BISSCKPT'
    u32    format version (little-endian)
    u32    header length
    bytes  UTF-8 JSON header: configs, counters, RNG state, vocab hash,
           and a manifest of named arrays (shape, dtype, offset, nbytes)
    bytes  array payload, little-endian, in manifest order
"""

import json
import logging
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from helpers.errors import DataError


MAGIC = b'BISSCKPT'
VERSION = 1
SUPPORTED_VERSIONS = (1,)
_PARAM, _ADAM_M, _ADAM_V = 'param/', 'adam.m/', 'adam.v/'


@dataclass
class Checkpoint:
    model_config: dict
    params: 'OrderedDict[str, np.ndarray]'
    optimizer_state: dict
    rng_state: dict
    step: int
    epoch: int
    batch_in_epoch: int
    vocab_hash: str
    train_config: dict = field(default_factory=dict)
    version: int = VERSION


def _little_endian(array):
    array = np.ascontiguousarray(array)
    return array.astype(array.dtype.newbyteorder('<'), copy=False)


def save_checkpoint(ckpt, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = [(_PARAM + k, v) for k, v in ckpt.params.items()]
    arrays += [(_ADAM_M + k, v) for k, v in ckpt.optimizer_state.get('m', {}).items()]
    arrays += [(_ADAM_V + k, v) for k, v in ckpt.optimizer_state.get('v', {}).items()]

    manifest = []
    offset = 0
    blobs = []
    for name, array in arrays:
        array = _little_endian(array)
        blob = array.tobytes()
        manifest.append({'name': name, 'shape': list(array.shape), 'dtype': array.dtype.str,
                         'offset': offset, 'nbytes': len(blob)})
        blobs.append(blob)
        offset += len(blob)

    header = {
        'model_config': ckpt.model_config,
        'train_config': ckpt.train_config,
        'optimizer': {'step_count': ckpt.optimizer_state.get('step_count', 0)},
        'rng_state': ckpt.rng_state,
        'step': ckpt.step,
        'epoch': ckpt.epoch,
        'batch_in_epoch': ckpt.batch_in_epoch,
        'vocab_hash': ckpt.vocab_hash,
        'arrays': manifest,
    }
    header_bytes = json.dumps(header).encode('utf-8')
    tmp = path.with_suffix(path.suffix + '.tmp')
    with open(tmp, 'wb') as f:
        f.write(MAGIC)
        f.write(struct.pack('<II', VERSION, len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)
    tmp.replace(path)
    logging.info(f'Checkpoint saved: {path} (step {ckpt.step})')
    return path


def read_header(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f'Checkpoint {path} not found')
    with open(path, 'rb') as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise DataError(f'{path} is not a checkpoint (bad magic)')
        version, header_len = struct.unpack('<II', f.read(8))
        if version not in SUPPORTED_VERSIONS:
            raise DataError(f'{path}: unsupported checkpoint version {version}')
        header = json.loads(f.read(header_len).decode('utf-8'))
        header['format_version'] = version
        payload_start = f.tell()
    return header, payload_start


def load_checkpoint(path):
    header, payload_start = read_header(path)
    params = OrderedDict()
    m, v = {}, {}
    with open(path, 'rb') as f:
        for entry in header['arrays']:
            f.seek(payload_start + entry['offset'])
            data = f.read(entry['nbytes'])
            if len(data) != entry['nbytes']:
                raise DataError(f'{path}: truncated array {entry["name"]}')
            array = np.frombuffer(data, dtype=np.dtype(entry['dtype'])).reshape(entry['shape'])
            array = array.astype(array.dtype.newbyteorder('='))
            name = entry['name']
            if name.startswith(_PARAM):
                params[name[len(_PARAM):]] = array
            elif name.startswith(_ADAM_M):
                m[name[len(_ADAM_M):]] = array
            elif name.startswith(_ADAM_V):
                v[name[len(_ADAM_V):]] = array
    return Checkpoint(
        model_config=header['model_config'],
        params=params,
        optimizer_state={'step_count': header['optimizer']['step_count'], 'm': m, 'v': v},
        rng_state=header['rng_state'],
        step=header['step'],
        epoch=header['epoch'],
        batch_in_epoch=header['batch_in_epoch'],
        vocab_hash=header['vocab_hash'],
        train_config=header.get('train_config', {}),
        version=header['format_version'],
    )


def describe_checkpoint(path):
    """Human-readable manifest without loading the payload."""
    header, _ = read_header(path)
    lines = [
        f'checkpoint: {path}',
        f'version: {header["format_version"]}',
        f'step: {header["step"]}  epoch: {header["epoch"]}  batch_in_epoch: {header["batch_in_epoch"]}',
        f'vocab hash: {header["vocab_hash"]}',
        f'model: {json.dumps(header["model_config"])}',
        f'strategy: {json.dumps(header.get("train_config", {}).get("strategy"))}',
        'arrays:',
    ]
    for entry in header['arrays']:
        lines.append(f'  {entry["name"]:<32} {str(tuple(entry["shape"])):<16} {entry["dtype"]}')
    return '\n'.join(lines)


def export_text(path, out_path):
    """Full text dump (header plus every array as nested lists) for debugging."""
    ckpt = load_checkpoint(path)
    dump = {
        'model_config': ckpt.model_config,
        'step': ckpt.step,
        'epoch': ckpt.epoch,
        'batch_in_epoch': ckpt.batch_in_epoch,
        'vocab_hash': ckpt.vocab_hash,
        'rng_state': ckpt.rng_state,
        'params': {k: v.tolist() for k, v in ckpt.params.items()},
        'optimizer': {
            'step_count': ckpt.optimizer_state['step_count'],
            'm': {k: v.tolist() for k, v in ckpt.optimizer_state['m'].items()},
            'v': {k: v.tolist() for k, v in ckpt.optimizer_state['v'].items()},
        },
    }
    with open(out_path, 'w', encoding='utf-8') as f:
        json.dump(dump, f, indent=1)
    return out_path
