"""
Tests for the decoder-input mixing engine: schedules, smooth functions,
every mixing rule and the two-pass training step.
"""

import math

import numpy as np
import pytest

from corpus.batching import collate
from corpus.vocab import BOS, N_SPECIAL, PAD
from helpers.errors import ConfigError
from models.transformer import ModelConfig, Seq2SeqTransformer
from samplers import mixing
from samplers.mixing import Source
from samplers.schedules import bridge_probability, decay_value, fuse_and_smooth, smooth_value
from samplers.strategies import (VARIANTS, AdaptiveBridge, Bilevel, BleuSLI, Clamp, ConfidenceAware,
                                 CosineSLI, DecaySS, ExponentialDecay, LinearDecay, NoSLI, SigmoidDecay,
                                 SigmoidSmooth, TeacherForcing, from_dict, resolve_variant, to_dict)
from samplers.two_pass import (StepContext, mix_batch, sentence_score, teacher_forced_predictions,
                               two_pass_training_step)
from tensorcore.tensor import Graph


V = 50


def _row(rng, length=12, n_pad=None):
    """Random (gold, pred, conf, pad) aligned to decoder-input slots."""
    n_pad = int(rng.integers(0, length - 1)) if n_pad is None else n_pad
    gold = rng.integers(N_SPECIAL, V, size=length)
    gold[0] = BOS
    pad = np.zeros(length, dtype=bool)
    if n_pad:
        pad[-n_pad:] = True
        gold[-n_pad:] = PAD
    pred = rng.integers(N_SPECIAL, V, size=length)
    conf = rng.random(length)
    pred[0], conf[0] = BOS, 0.0
    return gold, pred, conf, pad


def _never_touches_specials(decision, gold, pad):
    assert decision.tokens[0] == BOS and decision.sources[0] == Source.GOLD
    assert np.all(decision.tokens[pad] == PAD)
    assert np.all(decision.sources[pad] == Source.GOLD)


class TestDecay:

    def test_exponential_start(self):
        assert decay_value(ExponentialDecay(k=0.98), 0) == 1.0

    def test_sigmoid_start(self):
        assert decay_value(SigmoidDecay(k=5), 0) == pytest.approx(5 / 6)

    def test_linear_floor(self):
        assert decay_value(LinearDecay(eps=0.1, k=-0.001, b=1.0), 2000) == pytest.approx(0.1)

    def test_sigmoid_large_step_is_finite(self):
        assert decay_value(SigmoidDecay(k=5), 10 ** 6) == pytest.approx(0.0, abs=1e-12)

    def test_clamped(self):
        assert decay_value(LinearDecay(eps=0.0, k=0.5, b=1.0), 10) == 1.0

    def test_invalid_exponential(self):
        with pytest.raises(ConfigError):
            decay_value(ExponentialDecay(k=1.5), 0)

    def test_negative_step(self):
        with pytest.raises(ValueError):
            decay_value(ExponentialDecay(), -1)


class TestSmooth:

    def test_sigmoid_center(self):
        assert fuse_and_smooth(1.0, 0.6, SigmoidSmooth(k=10, b=0.6)) == 0.5

    def test_sigmoid_at_one(self):
        assert abs(smooth_value(1.0, SigmoidSmooth(k=10, b=0.6)) - 1 / (1 + math.exp(-4))) < 1e-12

    @pytest.mark.parametrize('x, expected', [(-0.2, 0.0), (0.37, 0.37), (1.5, 1.0)])
    def test_clamp(self, x, expected):
        assert smooth_value(x, Clamp()) == pytest.approx(expected)

    def test_sigmoid_strictly_inside(self):
        f2 = SigmoidSmooth(k=10, b=0.6)
        assert all(0.0 < fuse_and_smooth(s, p, f2) < 1.0 for s in (0.0, 0.5, 1.25) for p in (0.0, 0.4, 1.0))

    @pytest.mark.parametrize('smooth', [Clamp(), SigmoidSmooth(k=10, b=0.6)])
    def test_monotone(self, smooth):
        grid = np.linspace(0.0, 1.0, 11)
        for p in grid:
            values = [fuse_and_smooth(s, p, smooth) for s in np.linspace(0.0, 5.0, 21)]
            assert values == sorted(values)
        for s in (0.0, 0.8, 5.0):
            values = [fuse_and_smooth(s, p, smooth) for p in grid]
            assert values == sorted(values)


class TestBilevelMix:

    def test_frequency_law(self):
        n = 100_001
        gold = np.full(n, 10)
        gold[0] = BOS
        pred = np.full(n, 20)
        conf = np.full(n, 0.3)
        pad = np.zeros(n, dtype=bool)
        config = Bilevel(NoSLI(), Clamp(), alpha=0.95)
        decision = mixing.bilevel_mix(gold, pred, conf, pad, 1.0, config, np.random.default_rng(0), V)
        fraction = decision.fraction(Source.PRED, pad)
        assert 0.29 <= fraction <= 0.31
        assert not np.any(decision.sources == Source.RAND)

    def test_forced_zero_keeps_gold(self, rng):
        config = Bilevel(NoSLI(), SigmoidSmooth(k=10, b=1000.0), alpha=1.0)
        for _ in range(20):
            gold, pred, conf, pad = _row(rng)
            conf = np.minimum(conf, 0.99)
            decision = mixing.bilevel_mix(gold, pred, conf, pad, 1.0, config, rng, V)
            np.testing.assert_array_equal(decision.tokens, gold)

    def test_forced_one_takes_predictions(self, rng):
        config = Bilevel(NoSLI(), Clamp(), alpha=0.95)
        gold, pred, conf, _ = _row(rng, n_pad=0)
        conf = 0.05 + 0.85 * conf
        decision = mixing.bilevel_mix(gold, pred, conf, np.zeros(len(gold), dtype=bool), 100.0, config, rng, V)
        assert decision.tokens[0] == BOS
        np.testing.assert_array_equal(decision.tokens[1:], pred[1:])

    def test_guard_replaces_confident_slots(self, rng):
        config = Bilevel(BleuSLI(0.8), SigmoidSmooth(10, 0.6), alpha=0.95)
        gold, pred, conf, pad = _row(rng, n_pad=2)
        conf[1:] = 0.5
        conf[3] = 0.96
        decision = mixing.bilevel_mix(gold, pred, conf, pad, 1.0, config, rng, V)
        assert decision.sources[3] == Source.RAND
        assert N_SPECIAL <= decision.tokens[3] < V
        assert np.count_nonzero(decision.sources == Source.RAND) == 1

    def test_guard_probability_zero_disables(self, rng):
        config = Bilevel(NoSLI(), Clamp(), alpha=0.95, rand_guard_prob=0.0)
        gold, pred, conf, pad = _row(rng, n_pad=0)
        conf[1:] = 0.99
        decision = mixing.bilevel_mix(gold, pred, conf, pad, 1.0, config, rng, V)
        assert not np.any(decision.sources == Source.RAND)

    def test_records_score_and_probs(self, rng):
        config = Bilevel(BleuSLI(0.8), Clamp(), alpha=0.95)
        gold, pred, conf, pad = _row(rng, n_pad=3)
        conf = np.minimum(conf, 0.9)
        decision = mixing.bilevel_mix(gold, pred, conf, pad, 0.5, config, rng, V)
        assert decision.score == 0.5
        slots = mixing.mixable(pad)
        np.testing.assert_allclose(decision.probs[slots], np.clip(0.5 * conf[slots], 0, 1))
        assert np.all(decision.probs[~slots] == 0.0)


class TestConfidenceAware:

    def test_buckets(self, rng):
        config = ConfidenceAware(t_golden=0.7, t_rand=0.95)
        gold = np.array([BOS, 10, 11, 12, PAD])
        pred = np.array([BOS, 20, 21, 22, 23])
        conf = np.array([0.0, 0.5, 0.8, 0.97, 0.99])
        pad = gold == PAD
        decision = mixing.confidence_aware_mix(gold, pred, conf, pad, config, rng, V)
        assert list(decision.sources) == [Source.GOLD, Source.GOLD, Source.PRED, Source.RAND, Source.GOLD]
        assert decision.tokens[1] == 10 and decision.tokens[2] == 21
        assert N_SPECIAL <= decision.tokens[3] < V

    def test_deterministic_buckets(self):
        config = ConfidenceAware()
        gold = np.array([BOS, 10, 11, 12])
        pred = np.array([BOS, 20, 21, 22])
        conf = np.array([0.0, 0.5, 0.8, 0.6])
        pad = np.zeros(4, dtype=bool)
        a = mixing.confidence_aware_mix(gold, pred, conf, pad, config, np.random.default_rng(1), V)
        b = mixing.confidence_aware_mix(gold, pred, conf, pad, config, np.random.default_rng(2), V)
        np.testing.assert_array_equal(a.tokens, b.tokens)


class TestAdaptiveBridge:

    def test_center_of_schedule(self):
        assert bridge_probability(15, AdaptiveBridge(w=15)) == 0.5

    def test_late_epochs_take_predictions(self, rng):
        table = rng.standard_normal((V, 8))
        gold = np.array([BOS, 10, 11, 12])
        decision = mixing.adaptive_bridge_mix(gold, gold.copy(), np.zeros(4, dtype=bool), table,
                                              10 ** 4, AdaptiveBridge(), rng)
        assert list(decision.sources[1:]) == [Source.PRED] * 3

    def test_dissimilar_stays_gold(self, rng):
        table = np.zeros((V, 2))
        table[:, 0] = 1.0
        table[20:, :] = [0.0, 1.0]
        gold = np.array([BOS, 10, 11, 12])
        pred = np.array([BOS, 20, 21, 22])
        decision = mixing.adaptive_bridge_mix(gold, pred, np.zeros(4, dtype=bool), table,
                                              10 ** 4, AdaptiveBridge(beta=0.75), rng)
        assert np.all(decision.sources == Source.GOLD)
        np.testing.assert_array_equal(decision.tokens, gold)

    def test_invalid_tau(self):
        with pytest.raises(ConfigError):
            bridge_probability(0, AdaptiveBridge(tau=0.0))

    def test_shared_norms_match_own_norms(self):
        table = np.random.default_rng(3).standard_normal((V, 8)).astype(np.float32)
        gold = np.array([BOS, 10, 11, 12, 13])
        pred = np.array([BOS, 10, 30, 12, 40])
        pad = np.zeros(5, dtype=bool)
        table64 = np.asarray(table, dtype=np.float64)
        own = mixing.adaptive_bridge_mix(gold, pred, pad, table, 40, AdaptiveBridge(), np.random.default_rng(0))
        shared = mixing.adaptive_bridge_mix(gold, pred, pad, table64, 40, AdaptiveBridge(), np.random.default_rng(0),
                                            norms=mixing.embedding_norms(table64))
        np.testing.assert_array_equal(own.tokens, shared.tokens)
        np.testing.assert_array_equal(own.probs, shared.probs)


class TestDecayMix:

    def test_no_decay_keeps_gold(self, rng):
        gold, pred, conf, pad = _row(rng)
        decision = mixing.decay_mix(gold, pred, pad, 5000, ExponentialDecay(k=1.0), rng)
        np.testing.assert_array_equal(decision.tokens, gold)

    def test_full_decay_takes_predictions(self, rng):
        gold, pred, conf, pad = _row(rng, n_pad=0)
        decision = mixing.decay_mix(gold, pred, pad, 10 ** 6, LinearDecay(eps=0.0, k=-1.0, b=1.0), rng)
        np.testing.assert_array_equal(decision.tokens[1:], pred[1:])


class TestSpecialPositions:

    def test_random_batches_never_touch_bos_or_pad(self):
        rng = np.random.default_rng(42)
        table = rng.standard_normal((V, 8))
        for _ in range(1000):
            gold, pred, conf, pad = _row(rng)
            if rng.random() < 0.3:
                pred[1:] = gold[1:]
            for decision in (
                mixing.bilevel_mix(gold, pred, conf, pad, float(rng.random() * 5), VARIANTS['Bilevel-Bleu'], rng, V),
                mixing.bilevel_mix(gold, pred, conf, pad, 1.0, VARIANTS['Bilevel-f1'], rng, V),
                mixing.confidence_aware_mix(gold, pred, conf, pad, VARIANTS['Confidence-Aware'], rng, V),
                mixing.adaptive_bridge_mix(gold, pred, pad, table, int(rng.integers(0, 40)), AdaptiveBridge(), rng),
                mixing.decay_mix(gold, pred, pad, int(rng.integers(0, 20000)), ExponentialDecay(), rng),
            ):
                _never_touches_specials(decision, gold, pad)

    def test_align_to_input(self):
        pred_in, conf_in = mixing.align_to_input(np.array([[7, 8, 9]]), np.array([[0.1, 0.2, 0.3]]))
        assert pred_in.tolist() == [[BOS, 7, 8]]
        np.testing.assert_allclose(conf_in, [[0.0, 0.1, 0.2]])


class TestStrategies:

    def test_named_variants(self):
        assert resolve_variant('Bilevel-Bleu')[1] == Bilevel(BleuSLI(m=0.8), SigmoidSmooth(10, 0.6), alpha=0.95)
        assert resolve_variant('Bilevel-f1')[1] == Bilevel(BleuSLI(m=0.9), Clamp(), alpha=0.95)
        assert resolve_variant('Bilevel-Cosine')[1].sli == CosineSLI(m=0.6)
        assert resolve_variant('Bilevel-None')[1].sli == NoSLI()
        assert resolve_variant('Confidence-Aware')[1] == ConfidenceAware(0.7, 0.95)
        assert resolve_variant('AdapBridge')[1].w == 15

    def test_aliases(self):
        assert resolve_variant('TeacherForcing') == ('Transformer', TeacherForcing())
        assert resolve_variant('bilevel-bleu')[0] == 'Bilevel-Bleu'

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            resolve_variant('Beam-Search')

    def test_parameterized_variants(self):
        label, strategy = resolve_variant('Bilevel-Bleu:m=0.6')
        assert label == 'Bilevel-Bleu:m=0.6'
        assert strategy == Bilevel(BleuSLI(m=0.6), SigmoidSmooth(10, 0.6), alpha=0.95)
        label, strategy = resolve_variant('bilevel-none:rand_guard_prob=0.5, smooth.k=20')
        assert label == 'Bilevel-None:rand_guard_prob=0.5,smooth.k=20'
        assert (strategy.rand_guard_prob, strategy.smooth.k) == (0.5, 20)
        label, strategy = resolve_variant('Bilevel-Bleu:sli={"type": "CosineSLI", "m": 0.7},alpha=0.9')
        assert label == 'Bilevel-Bleu:sli={"type": "CosineSLI", "m": 0.7},alpha=0.9'
        assert strategy.alpha == 0.9
        assert strategy.sli == CosineSLI(m=0.7)
        assert resolve_variant('Bilevel-Bleu:mode="mean"')[1].sli.mode == 'mean'

    @pytest.mark.parametrize('name', [
        'Bilevel-Bleu:m=0', 'Bilevel-Bleu:m=abc', 'Bilevel-Bleu:beta=0.3', 'Bilevel-None:m=0.6',
        'Bilevel-Bleu:m', 'Bilevel-Bleu:=0.6', 'Beam-Search:m=0.6',
    ])
    def test_bad_parameterized_variants(self, name):
        with pytest.raises(ConfigError):
            resolve_variant(name)

    @pytest.mark.parametrize('name', list(VARIANTS))
    def test_serialization(self, name):
        assert from_dict(to_dict(VARIANTS[name])) == VARIANTS[name]

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            from_dict({'type': 'Bilevel', 'beta': 0.3})

    @pytest.mark.parametrize('data', [
        {'type': 'ConfidenceAware', 't_golden': 0.9, 't_rand': 0.5},
        {'type': 'Bilevel', 'alpha': 0.0},
        {'type': 'Bilevel', 'sli': {'type': 'BleuSLI', 'm': 0.0}},
        {'type': 'DecaySS', 'schedule': {'type': 'ExponentialDecay', 'k': 2.0}},
        {'type': 'SigmoidSmooth', 'k': 0.5},
    ])
    def test_invalid_values(self, data):
        with pytest.raises(ConfigError):
            from_dict(data)


# =============================================================================
# Two-pass step on a real model
# =============================================================================

@pytest.fixture
def model_and_batch(float64, word_vocab, copy_pairs):
    config = ModelConfig(vocab_size=len(word_vocab), d_model=16, n_heads=2, n_layers=1, d_ff=32,
                         dropout_rate=0.1, max_len=14)
    return Seq2SeqTransformer(config, seed=0), collate(copy_pairs[:6], word_vocab, 14, index=3)


def _ctx(step=0):
    return StepContext(seed=11, epoch=2, step=step, batch_index=3, dropout_rng=np.random.default_rng(5))


class TestTwoPass:

    def test_pass_one_records_no_graph(self, model_and_batch):
        model, batch = model_and_batch
        with Graph() as graph:
            out = teacher_forced_predictions(model, batch)
        assert graph.nodes == []
        assert out.pred.shape == batch.response.shape
        assert np.all((out.conf > 0) & (out.conf <= 1))

    def test_teacher_forcing_uses_gold_input(self, model_and_batch):
        model, batch = model_and_batch
        decoder_input, decisions = mix_batch(batch, model, TeacherForcing(), _ctx())
        np.testing.assert_array_equal(decoder_input, batch.decoder_input)
        assert decisions == []

    def test_forced_zero_matches_teacher_forcing_loss(self, model_and_batch):
        model, batch = model_and_batch
        with Graph():
            tf = two_pass_training_step(batch, model, TeacherForcing(), _ctx()).loss.item()
        forced = Bilevel(NoSLI(), SigmoidSmooth(k=10, b=1000.0), alpha=1.0)
        with Graph():
            result = two_pass_training_step(batch, model, forced, _ctx())
        np.testing.assert_array_equal(result.decoder_input, batch.decoder_input)
        assert result.loss.item() == tf

    def test_gradients_only_from_pass_two(self, model_and_batch):
        model, batch = model_and_batch
        with Graph() as graph:
            result = two_pass_training_step(batch, model, VARIANTS['Bilevel-Bleu'], _ctx())
        assert graph.nodes[-1].output is result.loss
        ops_recorded = [n.op for n in graph.nodes]
        assert ops_recorded.count('cross_entropy') == 1

    def test_embedding_norms_once_per_batch(self, model_and_batch, monkeypatch):
        model, batch = model_and_batch
        calls = []
        original = mixing.embedding_norms

        def counting(table):
            calls.append(table.dtype)
            return original(table)

        monkeypatch.setattr(mixing, 'embedding_norms', counting)
        mix_batch(batch, model, VARIANTS['AdapBridge'], _ctx())
        assert batch.size > 1
        assert calls == [np.float64]

    def test_same_context_same_mix(self, model_and_batch):
        model, batch = model_and_batch
        a, _ = mix_batch(batch, model, VARIANTS['Bilevel-Bleu'], _ctx())
        b, _ = mix_batch(batch, model, VARIANTS['Bilevel-Bleu'], _ctx())
        np.testing.assert_array_equal(a, b)

    def test_every_strategy_keeps_bos_and_pad(self, model_and_batch):
        model, batch = model_and_batch
        for name, strategy in VARIANTS.items():
            with Graph():
                result = two_pass_training_step(batch, model, strategy, _ctx(step=100))
            assert np.all(result.decoder_input[:, 0] == BOS), name
            assert np.all(result.decoder_input[batch.response_mask] == PAD), name
            assert np.isfinite(result.loss.item())
            assert abs(result.stats['gold'] + result.stats['pred'] + result.stats['rand'] - 1.0) < 1e-9

    def test_sentence_score_for_exact_prediction(self):
        gold = np.array([10, 11, 12, 13, 2, 0])
        pad = gold == 0
        assert sentence_score(BleuSLI(m=0.8), gold, gold, pad, None) == pytest.approx(5.0)
        assert sentence_score(NoSLI(), gold, gold, pad, None) == 1.0

    def test_degenerate_cosine_scores_zero(self):
        table = np.zeros((V, 4))
        gold = np.array([10, 11, 2])
        assert sentence_score(CosineSLI(0.6), gold, gold, np.zeros(3, dtype=bool), table) == 0.0

    def test_decay_strategy_uses_global_step(self, model_and_batch):
        model, batch = model_and_batch
        strategy = DecaySS(LinearDecay(eps=0.0, k=-1.0, b=1.0))
        early, _ = mix_batch(batch, model, strategy, _ctx(step=0))
        np.testing.assert_array_equal(early, batch.decoder_input)
        late, decisions = mix_batch(batch, model, strategy, _ctx(step=10))
        pass_one = teacher_forced_predictions(model, batch)
        pred_in, _ = mixing.align_to_input(pass_one.pred, pass_one.conf)
        slots = np.stack([mixing.mixable(p) for p in batch.response_mask])
        np.testing.assert_array_equal(late[slots], pred_in[slots])
