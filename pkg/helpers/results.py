#!/bin/env python3
# -*- coding: utf-8 -*-
# helpers/results.py
"""
Metrics rows and the two table renderings: UTF-8 CSV for machines and an
aligned plain-text table (BLEU-1..4, then Distinct-1..3) for people.
"""

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass
class MetricsRow:
    """Scores are percentages (x100)."""
    label: str
    bleu_1: float
    bleu_2: float
    bleu_3: float
    bleu_4: float
    distinct_1: float
    distinct_2: float
    distinct_3: float
    loss: float
    step: int

    def is_finite(self):
        return all(math.isfinite(getattr(self, f.name)) for f in fields(self) if f.name != 'label')


COLUMNS = [f.name for f in fields(MetricsRow)]
HEADERS = ['Model', 'BLEU-1', 'BLEU-2', 'BLEU-3', 'BLEU-4',
           'Distinct-1', 'Distinct-2', 'Distinct-3', 'Loss', 'Step']


def write_csv(rows, path, append=False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new_file = not append or not path.exists() or path.stat().st_size == 0
    with open(path, 'a' if append else 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=COLUMNS)
        if new_file:
            writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))
    return path


def read_csv(path):
    with open(path, encoding='utf-8', newline='') as f:
        return [MetricsRow(label=r['label'], step=int(r['step']),
                           **{k: float(r[k]) for k in COLUMNS if k not in ('label', 'step')})
                for r in csv.DictReader(f)]


def format_table(rows):
    cells = [HEADERS]
    for row in rows:
        cells.append([row.label] + [f'{getattr(row, k):.2f}' for k in COLUMNS[1:8]]
                     + [f'{row.loss:.4f}', str(row.step)])
    widths = [max(len(r[i]) for r in cells) for i in range(len(HEADERS))]

    def line(r):
        return '  '.join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))

    out = [line(cells[0]), '  '.join('-' * w for w in widths)]
    out.extend(line(r) for r in cells[1:])
    return '\n'.join(out)


def write_table(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(format_table(rows) + '\n')
    return path
