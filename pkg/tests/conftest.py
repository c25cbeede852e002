# tests/conftest.py
import numpy as np
import pytest

from corpus.dialogue import DialoguePair
from corpus.synthetic import make_words, write_noisy_copy_corpus
from corpus.vocab import Vocab
from helpers.config import CorpusConfig, ModelSection, OptimizerConfig, TrainConfig
from samplers.strategies import TeacherForcing
from tensorcore.tensor import set_default_dtype


@pytest.fixture
def float64():
    """Run the test in 64-bit and restore the training default afterwards."""
    set_default_dtype(np.float64)
    yield
    set_default_dtype(np.float32)


@pytest.fixture(autouse=True)
def restore_dtype():
    yield
    set_default_dtype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def word_vocab():
    return Vocab(make_words(46))


@pytest.fixture
def copy_pairs():
    """Exact-copy pairs over a 46-word vocabulary."""
    words = make_words(46)
    gen = np.random.default_rng(7)
    pairs = []
    for _ in range(40):
        sentence = [words[i] for i in gen.integers(0, len(words), size=gen.integers(3, 8))]
        pairs.append(DialoguePair(sentence, list(sentence)))
    return pairs


@pytest.fixture
def corpus_dir(tmp_path):
    out = tmp_path / 'corpus'
    write_noisy_copy_corpus(out, n_train_pairs=64, n_eval_pairs=16, seed=3)
    return out


@pytest.fixture
def tiny_config(corpus_dir, tmp_path):
    return TrainConfig(
        model=ModelSection(d_model=16, n_heads=2, n_layers=1, d_ff=32, dropout_rate=0.1, max_len=14),
        strategy=TeacherForcing(),
        optimizer=OptimizerConfig(learning_rate=3e-3, warmup_steps=5),
        corpus=CorpusConfig(train=str(corpus_dir / 'train.txt'), valid=str(corpus_dir / 'valid.txt'),
                            test=str(corpus_dir / 'test.txt')),
        epochs=2,
        batch_size=16,
        seed=5,
        eval_batch_size=16,
        checkpoint_dir=str(tmp_path / 'run'),
    )
