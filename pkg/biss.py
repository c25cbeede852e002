#!/bin/env python3
# -*- coding: utf-8 -*-
# biss.py
"""
Bilevel scheduled sampling laboratory: train, evaluate and compare
seq2seq dialogue models trained with different decoder-input mixing strategies.
"""
__version__ = "1.0.0"
__status__ = "Development"


# ================================================
import argparse, json, logging, os, sys
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path

# Single-threaded BLAS must be chosen before numpy is imported.
if os.environ.get('BISS_DETERMINISTIC') == '1':
    for var in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
        os.environ[var] = '1'

from corpus.dialogue import load_pairs
from corpus.synthetic import write_noisy_copy_corpus
from helpers.config import apply_overrides, load_config
from helpers.errors import BissError, ConfigError
from helpers.results import format_table, write_csv
from training.ablation import ablate
from training.checkpoint import describe_checkpoint, export_text
from training.evaluation import evaluate_checkpoint, generate
from training.trainer import train


# -------------------------
# Important (static) variables
DEFAULT_CONFIG = 'config.json'
DEFAULT_LOG = 'log/biss.log'


# -------------------------
# Parser for arguments
def build_parser():
    parser = argparse.ArgumentParser(description='Bilevel scheduled sampling laboratory.')
    parser.add_argument('--INFLUXDB_TOKEN', help='InfluxDB token')
    parser.add_argument('--logging_filename', help='Logging output file name')
    sub = parser.add_subparsers(dest='command', required=True)

    def run_flags(p):
        p.add_argument('--config', default=None, help=f'JSON run configuration (default {DEFAULT_CONFIG} if present)')
        p.add_argument('--seed', type=int, help='Override the config seed')
        p.add_argument('--corpus', help='Corpus file, or directory holding train/valid/test.txt')
        p.add_argument('--out-dir', dest='out_dir', help='Override checkpoint_dir')

    p = sub.add_parser('train', help='Train one model')
    run_flags(p)
    p.add_argument('--strategy', help='Named variant, e.g. Bilevel-Bleu')
    p.add_argument('--resume', help='Checkpoint to continue from')

    p = sub.add_parser('eval', help='Score a checkpoint on held-out pairs')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--corpus', required=True, help='Corpus file, or directory holding test.txt')
    p.add_argument('--vocab', help='vocab.txt (default: next to the checkpoint)')
    p.add_argument('--label')
    p.add_argument('--out-dir', dest='out_dir', help='Append the row to <out-dir>/metrics.csv')

    p = sub.add_parser('generate', help='Greedy response to one prompt')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--vocab')
    p.add_argument('prompt')

    p = sub.add_parser('ablate', help='Train and compare several strategy variants')
    run_flags(p)
    p.add_argument('--variants', nargs='+', required=True, help='Variant names, Name:key=value overrides or JSON strategy objects')
    p.add_argument('--jobs', type=int, default=1, help='Parallel training processes')

    p = sub.add_parser('inspect-checkpoint', help='Print a checkpoint manifest')
    p.add_argument('checkpoint')
    p.add_argument('--text', help='Also dump every array to this JSON text file')

    p = sub.add_parser('make-corpus', help='Write the synthetic noisy-copy dialogue corpus')
    p.add_argument('--out-dir', dest='out_dir', required=True)
    p.add_argument('--n-train', dest='n_train', type=int, default=2000, help='Training pairs')
    p.add_argument('--n-eval', dest='n_eval', type=int, default=200, help='Pairs per held-out split')
    p.add_argument('--noise', type=float, default=0.1)
    p.add_argument('--seed', type=int, default=0)
    return parser


# -------------------------
# Logging
def setup_logging(logging_filename=None):
    Path('log').mkdir(parents=True, exist_ok=True)
    logging_filename = logging_filename if logging_filename else DEFAULT_LOG
    Path(logging_filename).parent.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
            level=logging.DEBUG,
            format='%(asctime)s [%(levelname)s] %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S',
            handlers=[
                logging.StreamHandler(sys.stdout),
                TimedRotatingFileHandler(logging_filename, when='W0')
                ]
            )


# -------------------------
# Commands
def run_config(args, strategy=None):
    path = args.config
    if path is None and Path(DEFAULT_CONFIG).exists():
        path = DEFAULT_CONFIG
    config = load_config(path)
    return apply_overrides(config, seed=args.seed, strategy=strategy, corpus=args.corpus, out_dir=args.out_dir)


def eval_split(corpus):
    corpus = Path(corpus)
    if corpus.is_dir():
        for split in ('test', 'valid'):
            if (corpus / f'{split}.txt').exists():
                return corpus / f'{split}.txt'
        raise ConfigError(f'No test.txt or valid.txt under {corpus}')
    return corpus


def cmd_train(args):
    result = train(run_config(args, strategy=args.strategy), resume=args.resume)
    logging.info(f'Training done. Final checkpoint {result.checkpoint}')
    if result.final_metrics is not None:
        print(format_table([result.final_metrics]))


def cmd_eval(args):
    pairs = load_pairs(eval_split(args.corpus))
    row = evaluate_checkpoint(args.checkpoint, pairs, vocab_path=args.vocab, label=args.label, progress=True)
    if args.out_dir:
        write_csv([row], Path(args.out_dir) / 'metrics.csv', append=True)
    print(format_table([row]))


def cmd_generate(args):
    print(generate(args.checkpoint, args.prompt, vocab_path=args.vocab))


def cmd_ablate(args):
    if args.jobs < 1:
        raise ConfigError('--jobs must be >= 1')
    variants = []
    for v in args.variants:
        if v.lstrip().startswith('{'):
            try:
                v = json.loads(v)
            except ValueError as e:
                raise ConfigError(f'Bad variant object {v!r}: {e}') from e
        variants.append(v)
    rows = ablate(run_config(args), variants, jobs=args.jobs)
    print(format_table(rows))


def cmd_inspect(args):
    print(describe_checkpoint(args.checkpoint))
    if args.text:
        logging.info(f'Text export written to {export_text(args.checkpoint, args.text)}')


def cmd_make_corpus(args):
    paths = write_noisy_copy_corpus(args.out_dir, n_train_pairs=args.n_train, n_eval_pairs=args.n_eval,
                                    noise=args.noise, seed=args.seed)
    for split, path in paths.items():
        print(f'{split}: {path}')


COMMANDS = {
    'train': cmd_train,
    'eval': cmd_eval,
    'generate': cmd_generate,
    'ablate': cmd_ablate,
    'inspect-checkpoint': cmd_inspect,
    'make-corpus': cmd_make_corpus,
}


# ================================================
def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.INFLUXDB_TOKEN:
        os.environ['INFLUXDB_TOKEN'] = args.INFLUXDB_TOKEN
    setup_logging(args.logging_filename)
    try:
        COMMANDS[args.command](args)
    except BissError as e:
        logging.error(f'{type(e).__name__}: {e}')
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
