"""
Tests for the seq2seq transformer: shapes, masking properties, greedy
decoding contracts and a whole-model gradient check.
"""

import numpy as np
import pytest

from corpus.batching import Batch
from corpus.vocab import BOS, EOS, PAD
from helpers.errors import ConfigError
from models.transformer import EVAL, TRAIN, ModelConfig, Seq2SeqTransformer
from tensorcore import ops
from tensorcore.gradcheck import gradcheck
from tensorcore.tensor import Graph, backward


def _random_batch(rng, batch=3, src_len=6, tgt_len=5, vocab=20):
    context = rng.integers(4, vocab, size=(batch, src_len))
    response = rng.integers(4, vocab, size=(batch, tgt_len))
    for row in range(batch):
        n_src = int(rng.integers(1, src_len + 1))
        n_tgt = int(rng.integers(1, tgt_len + 1))
        context[row, n_src:] = PAD
        response[row, n_tgt - 1] = EOS
        response[row, n_tgt:] = PAD
    response_mask = response == PAD
    decoder_input = np.concatenate([np.full((batch, 1), BOS), response[:, :-1]], axis=1)
    decoder_input[response_mask] = PAD
    return Batch(context=context, response=response, decoder_input=decoder_input,
                 context_mask=context == PAD, response_mask=response_mask)


@pytest.fixture
def small_model(float64):
    config = ModelConfig(vocab_size=20, d_model=16, n_heads=2, n_layers=2, d_ff=32,
                         dropout_rate=0.1, max_len=8)
    return Seq2SeqTransformer(config, seed=3)


class TestConfig:

    def test_heads_must_divide_width(self):
        with pytest.raises(ConfigError):
            ModelConfig(vocab_size=10, d_model=10, n_heads=3).validate()

    def test_max_len_at_least_two(self):
        with pytest.raises(ConfigError):
            ModelConfig(vocab_size=10, max_len=1).validate()

    def test_dropout_range(self):
        with pytest.raises(ConfigError):
            ModelConfig(vocab_size=10, dropout_rate=1.0).validate()

    def test_tied_embeddings_drop_output_matrix(self):
        model = Seq2SeqTransformer(ModelConfig(vocab_size=12, d_model=8, n_heads=2, d_ff=16, tie_embeddings=True))
        assert 'out.w' not in model.params
        assert model.decoder_embedding.shape == (12, 8)


class TestShapes:

    def test_encode_shape(self, float64):
        model = Seq2SeqTransformer(ModelConfig(vocab_size=30, d_model=16, n_heads=4, max_len=8))
        src = np.random.default_rng(0).integers(4, 30, size=(2, 5))
        assert model.encode(src).shape == (2, 5, 16)

    def test_decode_shape(self, float64):
        model = Seq2SeqTransformer(ModelConfig(vocab_size=50, d_model=16, n_heads=4, max_len=8))
        src = np.array([[5, 6, 7]])
        memory = model.encode(src)
        tgt = np.array([[BOS, 9, 10, 11]])
        assert model.decode(tgt, memory, src == PAD).shape == (1, 4, 50)

    def test_too_long_raises(self, small_model):
        with pytest.raises(ValueError):
            small_model.encode(np.full((1, 9), 5))

    def test_id_out_of_range_raises(self, small_model):
        with pytest.raises(IndexError):
            small_model.encode(np.array([[5, 20]]))

    def test_decoder_embedding_is_vocab_by_width(self, small_model):
        assert small_model.decoder_embedding.shape == (20, 16)


class TestMasking:

    def test_causality(self, small_model):
        rng = np.random.default_rng(0)
        for _ in range(100):
            batch = _random_batch(rng)
            memory = small_model.encode(batch.context, batch.context_mask)
            tgt = np.concatenate([np.full((3, 1), BOS), rng.integers(4, 20, size=(3, 4))], axis=1)
            t = int(rng.integers(0, 4))
            perturbed = tgt.copy()
            perturbed[:, t + 1:] = rng.integers(4, 20, size=(3, 4 - t))
            a = small_model.decode(tgt, memory, batch.context_mask).data
            b = small_model.decode(perturbed, memory, batch.context_mask).data
            np.testing.assert_allclose(a[:, :t + 1], b[:, :t + 1], rtol=0, atol=1e-10)

    def test_pad_substitution(self, small_model):
        rng = np.random.default_rng(1)
        for _ in range(100):
            batch = _random_batch(rng)
            logits = small_model.forward(batch, mode=EVAL).data
            swapped = Batch(context=batch.context.copy(), response=batch.response,
                            decoder_input=batch.decoder_input.copy(), context_mask=batch.context_mask,
                            response_mask=batch.response_mask)
            swapped.context[batch.context_mask] = rng.integers(4, 20, size=int(batch.context_mask.sum()))
            swapped.decoder_input[batch.response_mask] = rng.integers(4, 20, size=int(batch.response_mask.sum()))
            other = small_model.forward(swapped, mode=EVAL).data
            keep = ~batch.response_mask
            np.testing.assert_allclose(logits[keep], other[keep], rtol=0, atol=1e-10)

    def test_batch_permutation(self, small_model):
        rng = np.random.default_rng(2)
        batch = _random_batch(rng, batch=4)
        order = np.array([2, 0, 3, 1])
        permuted = Batch(context=batch.context[order], response=batch.response[order],
                         decoder_input=batch.decoder_input[order], context_mask=batch.context_mask[order],
                         response_mask=batch.response_mask[order])
        a = small_model.forward(batch).data
        b = small_model.forward(permuted).data
        np.testing.assert_allclose(a[order], b, atol=1e-10)

    def test_eval_is_deterministic(self, small_model):
        batch = _random_batch(np.random.default_rng(3))
        np.testing.assert_array_equal(small_model.forward(batch).data, small_model.forward(batch).data)

    def test_train_mode_uses_dropout(self, small_model):
        batch = _random_batch(np.random.default_rng(4))
        a = small_model.forward(batch, mode=TRAIN, rng=np.random.default_rng(0)).data
        b = small_model.forward(batch, mode=TRAIN, rng=np.random.default_rng(0)).data
        c = small_model.forward(batch, mode=EVAL).data
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)


class TestGreedy:

    def test_never_exceeds_max_len(self, small_model):
        src = np.random.default_rng(5).integers(4, 20, size=(6, 5))
        for max_len in (1, 3, 8):
            outputs = small_model.greedy_generate(src, max_len=max_len)
            assert len(outputs) == 6
            assert all(len(o) <= max_len for o in outputs)
            assert all(EOS not in o for o in outputs)

    def test_deterministic(self, small_model):
        src = np.random.default_rng(6).integers(4, 20, size=(4, 5))
        assert small_model.greedy_generate(src) == small_model.greedy_generate(src)

    def test_records_no_graph(self, small_model):
        src = np.random.default_rng(7).integers(4, 20, size=(2, 5))
        with Graph() as graph:
            small_model.greedy_generate(src, max_len=3)
        assert graph.nodes == []


class TestModelGradients:
    """Whole 2-layer model against finite differences on sampled coordinates."""

    @pytest.mark.parametrize('seed', range(10))
    def test_full_model(self, float64, seed):
        config = ModelConfig(vocab_size=12, d_model=16, n_heads=2, n_layers=2, d_ff=32,
                             dropout_rate=0.1, max_len=6)
        model = Seq2SeqTransformer(config, seed=seed)
        batch = _random_batch(np.random.default_rng(seed), batch=2, src_len=5, tgt_len=4, vocab=12)

        def loss(*_):
            logits = model.forward(batch, mode=TRAIN, rng=np.random.default_rng(seed))
            return ops.cross_entropy(logits, batch.response, batch.response_mask)

        worst = gradcheck(loss, model.parameters(), step=1e-4, coords_per_input=3,
                          rng=np.random.default_rng(seed))
        assert worst < 1e-3

    def test_every_parameter_gets_a_gradient(self, small_model):
        batch = _random_batch(np.random.default_rng(8))
        with Graph():
            logits = small_model.forward(batch, mode=EVAL)
            backward(ops.cross_entropy(logits, batch.response, batch.response_mask))
        for name, p in small_model.params.items():
            assert p.grad is not None, name
            assert p.grad.shape == p.data.shape

    def test_state_dict_round_trip(self, small_model):
        other = Seq2SeqTransformer(small_model.config, seed=99)
        other.load_state_dict(small_model.state_dict())
        batch = _random_batch(np.random.default_rng(9))
        np.testing.assert_array_equal(other.forward(batch).data, small_model.forward(batch).data)

    def test_load_state_dict_rejects_missing(self, small_model):
        arrays = small_model.state_dict()
        arrays.pop('out.b')
        with pytest.raises(ConfigError):
            small_model.load_state_dict(arrays)
