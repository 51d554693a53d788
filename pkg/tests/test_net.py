"""Tests for the hybrid DNN, speaker hooks, training and checkpoints."""

import numpy as np
import pytest

from dysasr.core.container import read_container, write_container
from dysasr.core.models import AdaptMethod, ForwardMode, ModelConfig, TrainConfig
from dysasr.dsp import FeatureNormalizer
from dysasr.net import (
    FrameDataset,
    Hook,
    HybridDnn,
    UtteranceFrames,
    cross_entropy,
    evaluate_loss,
    frame_accuracy,
    load_checkpoint,
    recalibrate_bn,
    save_checkpoint,
    train_model,
)
from tests.conftest import toy_spec

EPS = 1e-6


def numeric_grad(f, array: np.ndarray, index: tuple) -> float:
    saved = array[index]
    array[index] = saved + EPS
    up = f()
    array[index] = saved - EPS
    down = f()
    array[index] = saved
    return (up - down) / (2 * EPS)


def sample_indices(shape: tuple, rng: np.random.Generator, k: int = 4) -> list[tuple]:
    flat = rng.choice(int(np.prod(shape)), size=min(k, int(np.prod(shape))), replace=False)
    return [np.unravel_index(i, shape) for i in flat]


class TestForward:
    def test_shapes_and_normalization(self, toy_model, toy_batch):
        x, _, _ = toy_batch
        result = toy_model.forward(x)
        assert result.primary.shape == (12, 5)
        assert result.aux.shape == (12, 3)
        np.testing.assert_allclose(result.primary_posteriors.sum(axis=1), 1.0)
        np.testing.assert_allclose(result.aux_posteriors.sum(axis=1), 1.0)

    def test_wrong_input_dim(self, toy_model):
        with pytest.raises(ValueError, match="expected"):
            toy_model.forward(np.zeros((2, 7)))

    def test_eval_is_pure(self, toy_model, toy_batch):
        x, _, _ = toy_batch
        before = toy_model.checksum()
        first = toy_model.log_posteriors(x)
        toy_model.forward(x, ForwardMode.TRAIN)
        np.testing.assert_array_equal(toy_model.log_posteriors(x), first)
        assert toy_model.checksum() == before

    def test_neutral_lhuc_is_identity(self, toy_model, toy_batch):
        x, _, _ = toy_batch
        hooks = {0: Hook(AdaptMethod.LHUC, np.zeros(8)), 2: Hook(AdaptMethod.LHUC, np.zeros(5))}
        np.testing.assert_allclose(toy_model.log_posteriors(x, hooks), toy_model.log_posteriors(x))

    def test_hook_width_mismatch(self, toy_model, toy_batch):
        x, _, _ = toy_batch
        with pytest.raises(ValueError, match="does not match layer width"):
            toy_model.forward(x, hooks={0: Hook(AdaptMethod.LHUC, np.zeros(3))})

    def test_spec_layout(self, toy_model):
        assert toy_model.layer_widths() == [8, 8, 5]
        assert toy_model.spec.layers[1].skip_from == 0
        assert toy_model.parameter_count() == sum(p.size for p in toy_model.params.values())

    def test_target_out_of_range(self, toy_model, toy_batch):
        x, _, _ = toy_batch
        with pytest.raises(IndexError):
            cross_entropy(toy_model.forward(x).primary, np.full(12, 5))


class TestBackward:
    @pytest.mark.parametrize("mode", [ForwardMode.TRAIN, ForwardMode.EVAL])
    def test_parameter_gradients(self, toy_model, toy_batch, mode):
        x, pt, at = toy_batch

        def loss():
            return toy_model.loss(toy_model.forward(x, mode), pt, at)

        grads = toy_model.backward(toy_model.forward(x, mode), pt, at)
        rng = np.random.default_rng(0)
        for key, value in toy_model.params.items():
            for index in sample_indices(value.shape, rng):
                expected = numeric_grad(loss, value, index)
                assert grads.params[key][index] == pytest.approx(expected, rel=1e-4, abs=1e-7), key

    @pytest.mark.parametrize(
        "method",
        [AdaptMethod.LHUC, AdaptMethod.HUB, AdaptMethod.PACT_SCALE, AdaptMethod.PACT_BIAS],
    )
    def test_hook_gradients(self, toy_model, toy_batch, method):
        x, pt, at = toy_batch
        r = np.random.default_rng(1).normal(0.0, 0.3, 8)
        hooks = {1: Hook(method, r)}

        def loss():
            return toy_model.loss(toy_model.forward(x, hooks=hooks), pt, at)

        grads = toy_model.backward(toy_model.forward(x, hooks=hooks), pt, at)
        for i in range(8):
            expected = numeric_grad(loss, r, (i,))
            assert grads.hooks[1][i] == pytest.approx(expected, rel=1e-4, abs=1e-7)

    def test_mix_and_input_gradients(self, toy_model, toy_batch):
        x, pt, at = toy_batch
        x = x.copy()
        mix = {0: np.linspace(0.2, 1.0, 6)}

        def loss():
            return toy_model.loss(toy_model.forward(x, mix=mix), pt, at, reduction="sum")

        grads = toy_model.backward(toy_model.forward(x, mix=mix), pt, at, reduction="sum")
        for i in range(6):
            assert grads.mix[0][i] == pytest.approx(
                numeric_grad(loss, mix[0], (i,)), rel=1e-4, abs=1e-7
            )
        for index in [(0, 0), (5, 3), (11, 5)]:
            assert grads.inputs[index] == pytest.approx(
                numeric_grad(loss, x, index), rel=1e-4, abs=1e-7
            )

    def test_needs_cache(self, toy_model, toy_batch):
        x, pt, at = toy_batch
        with pytest.raises(ValueError, match="missing forward cache"):
            toy_model.backward(toy_model.forward(x, keep_cache=False), pt, at)


class TestTraining:
    def test_loss_decreases(self, shift_data):
        dataset = shift_data(0)
        model = HybridDnn(toy_spec(n_states=3, n_phones=2), seed=0)
        config = TrainConfig(lr=0.05, batch=32, epochs=6, decay_every=10)
        before = evaluate_loss(model, dataset)
        model, losses = train_model(model, dataset, config)
        assert len(losses) == 6
        assert losses[-1] < losses[0]
        assert evaluate_loss(model, dataset) < before
        assert frame_accuracy(model, dataset) > 0.5

    def test_deterministic(self, shift_data):
        dataset = shift_data(1)
        config = TrainConfig(batch=50, epochs=2)
        first, _ = train_model(HybridDnn(toy_spec(n_states=3, n_phones=2), seed=5), dataset, config)
        second, _ = train_model(
            HybridDnn(toy_spec(n_states=3, n_phones=2), seed=5), dataset, config
        )
        assert first.checksum() == second.checksum()

    def test_dataset_subset_and_speakers(self, shift_data):
        dataset = shift_data(2)
        assert dataset.speaker_ids == ["S1", "S2"]
        s2 = dataset.by_speaker("S2")
        assert s2.utt_ids == ["S2_0", "S2_1", "S2_2", "S2_3"]
        assert len(s2) == 200
        assert set(s2.speakers) == {1}

    def test_target_length_mismatch(self):
        with pytest.raises(ValueError, match="targets"):
            UtteranceFrames("u", "s", np.zeros((3, 2)), np.zeros(2), np.zeros(3))

    def test_splicing_in_dataset(self):
        utt = UtteranceFrames("u", "s", np.arange(8.0).reshape(4, 2), np.zeros(4), np.zeros(4))
        dataset = FrameDataset.from_utterances([utt], 1, 1)
        assert dataset.input_dim == 6
        np.testing.assert_array_equal(dataset.features[0], [0, 1, 0, 1, 2, 3])


    def test_recalibrated_bn_matches_data_statistics(self, toy_batch):
        x, primary, aux = toy_batch
        dataset = FrameDataset.from_utterances([UtteranceFrames("u", "s", x, primary, aux)], 0, 0)
        model = recalibrate_bn(HybridDnn(toy_spec(), seed=3), dataset, batch=len(x))
        train = model.forward(x, ForwardMode.TRAIN, rng=np.random.default_rng(0))
        assert any(c.batch_stats for c in train.cache.layers)
        for index, c in enumerate(train.cache.layers):
            if c.batch_stats:
                np.testing.assert_allclose(model.bn_state[f"L{index}.running_mean"], c.batch_mean)
                np.testing.assert_allclose(model.bn_state[f"L{index}.running_var"], c.batch_var)
        np.testing.assert_allclose(model.log_posteriors(x), train.primary, atol=1e-10)

    def test_recalibration_pools_batches(self, toy_batch):
        x, primary, aux = toy_batch
        dataset = FrameDataset.from_utterances([UtteranceFrames("u", "s", x, primary, aux)], 0, 0)
        model = recalibrate_bn(HybridDnn(toy_spec(), seed=3), dataset, batch=4)
        p = model.params
        first = (x @ p["L0.A"]) @ p["L0.B"] + p["L0.b"]
        np.testing.assert_allclose(model.bn_state["L0.running_mean"], first.mean(axis=0))

class TestCheckpoint:
    def test_save_then_load(self, tmp_path, toy_model):
        normalizer = FeatureNormalizer(mean=np.arange(6.0), std=np.full(6, 2.0))
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, toy_model, normalizer, {"phones": ["aa", "m"]})
        model, norm, meta = load_checkpoint(path)
        assert model.checksum() == toy_model.checksum()
        assert model.spec == toy_model.spec
        np.testing.assert_array_equal(norm.mean, normalizer.mean)
        assert meta == {"phones": ["aa", "m"]}

    def test_bytes_are_deterministic(self, tmp_path, toy_model):
        save_checkpoint(tmp_path / "a.ckpt", toy_model)
        save_checkpoint(tmp_path / "b.ckpt", toy_model.copy())
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "x.bin"
        write_container(path, b"XXXX", {"a": np.zeros(2)})
        with pytest.raises(ValueError):
            read_container(path, b"DYSM")

    def test_bigger_model_spec(self):
        spec = ModelConfig(n_layers=4, hidden_width=16, proj_dim=4, n_factored=3).build_spec(
            10, 6, 3
        )
        assert [layer.proj_dim for layer in spec.layers] == [4, 4, 4, None]
