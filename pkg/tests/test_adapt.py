"""Tests for speaker transforms, SAT, test-time and Bayesian adaptation."""

import math

import numpy as np
import pytest

from dysasr.adapt import (
    SpeakerTransform,
    TransformBank,
    VariationalPosterior,
    adapt_speakers,
    apply_transform,
    bayes_adapt,
    elbo_loss,
    load_transform_store,
    monte_carlo_kl,
    posterior_mean_inference,
    sat_train,
    save_transform_store,
    select_adaptation_subset,
)
from dysasr.adapt.bayes import draw_eps
from dysasr.adapt.test_time import test_time_adapt as adapt_transform
from dysasr.core.models import (
    RAPID_ADAPTATION_BUDGETS,
    AdaptationBudget,
    AdaptConfig,
    AdaptMethod,
    TrainConfig,
)
from dysasr.net import (
    FrameDataset,
    HybridDnn,
    UtteranceFrames,
    evaluate_loss,
    frame_accuracy,
    train_model,
)
from dysasr.score import paired_sign_test
from tests.conftest import shift_dataset, toy_spec

PRIOR = 0.001


@pytest.fixture
def trained(shift_data):
    """A small model trained on both speakers, plus the data."""
    dataset = shift_data(0, n_per_speaker=120)
    model = HybridDnn(toy_spec(n_states=3, n_phones=2), seed=1)
    model, _ = train_model(model, dataset, TrainConfig(batch=40, epochs=3))
    return model, dataset


class TestPosterior:
    def test_prior_has_zero_kl(self):
        post = VariationalPosterior.from_mean({0: np.zeros(4)}, math.log(PRIOR), PRIOR)
        assert post.kl() == pytest.approx(0.0, abs=1e-12)

    def test_shifted_mean_kl(self):
        post = VariationalPosterior.from_mean({0: np.full(3, 0.1)}, math.log(PRIOR), PRIOR)
        assert post.kl() == pytest.approx(3 * 5.0)

    def test_kl_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            post = VariationalPosterior(
                {0: rng.normal(0, 0.05, 5)}, {0: math.log(PRIOR) + rng.uniform(-2, 2, 5)}, PRIOR
            )
            assert post.kl() >= 0.0

    def test_monte_carlo_matches_closed_form(self):
        rng = np.random.default_rng(1)
        post = VariationalPosterior(
            {0: rng.normal(0, 0.05, 4), 1: rng.normal(0, 0.05, 4)},
            {
                0: math.log(PRIOR) + rng.uniform(-1, 1, 4),
                1: math.log(PRIOR) + rng.uniform(-1, 1, 4),
            },
            PRIOR,
        )
        estimate = monte_carlo_kl(post, 10_000, np.random.default_rng(2))
        assert estimate == pytest.approx(post.kl(), rel=0.02)

    def test_kl_gradient(self):
        rng = np.random.default_rng(3)
        post = VariationalPosterior(
            {0: rng.normal(0, 0.05, 3)}, {0: math.log(PRIOR) + rng.uniform(-1, 1, 3)}, PRIOR
        )
        d_mu, d_lv = post.kl_grad()
        eps = 1e-7
        for store, grad in ((post.mu, d_mu), (post.log_var, d_lv)):
            for i in range(3):
                saved = store[0][i]
                store[0][i] = saved + eps
                up = post.kl()
                store[0][i] = saved - eps
                down = post.kl()
                store[0][i] = saved
                assert grad[0][i] == pytest.approx((up - down) / (2 * eps), rel=1e-5, abs=1e-6)

    def test_sample_is_reparameterized(self):
        post = VariationalPosterior.from_mean({0: np.array([1.0, 2.0])}, math.log(4.0))
        r = post.sample({0: np.array([1.0, -1.0])})
        np.testing.assert_allclose(r[0], [3.0, 0.0])

    def test_invalid_prior(self):
        with pytest.raises(ValueError, match="prior variance"):
            VariationalPosterior.from_mean({0: np.zeros(2)}, 0.0, prior_var=0.0)

    def test_mc_needs_samples(self):
        post = VariationalPosterior.from_mean({0: np.zeros(2)}, 0.0)
        with pytest.raises(ValueError):
            monte_carlo_kl(post, 0, np.random.default_rng(0))


class TestTransforms:
    @pytest.mark.parametrize("method", list(AdaptMethod))
    def test_neutral_is_identity(self, method):
        t = SpeakerTransform.neutral("D01", method, [0, 1], [4, 3])
        x = np.random.default_rng(0).normal(size=(5, 4))
        np.testing.assert_allclose(apply_transform(t, 0, x), x)

    def test_lhuc_scale_range(self):
        t = SpeakerTransform("D01", AdaptMethod.LHUC, {0: np.array([50.0, -50.0])})
        out = apply_transform(t, 0, np.ones((1, 2)))
        np.testing.assert_allclose(out, [[2.0, 0.0]], atol=1e-12)

    def test_unadapted_layer(self):
        t = SpeakerTransform.neutral("D01", AdaptMethod.HUB, [1], [4, 3])
        with pytest.raises(KeyError, match="not adapted"):
            apply_transform(t, 0, np.ones((1, 4)))

    def test_width_mismatch(self):
        t = SpeakerTransform.neutral("D01", AdaptMethod.HUB, [0], [4])
        with pytest.raises(ValueError, match="does not match"):
            apply_transform(t, 0, np.ones((1, 5)))

    def test_store(self, tmp_path):
        plain = SpeakerTransform("D01", AdaptMethod.LHUC, {0: np.array([0.1, 0.2])})
        post = VariationalPosterior.from_mean({2: np.array([0.3])}, -3.0)
        bayes = posterior_mean_inference(post, "D02", AdaptMethod.PACT_BIAS)
        save_transform_store(tmp_path / "t.bin", {"D01": plain, "D02": bayes})
        loaded = load_transform_store(tmp_path / "t.bin")
        np.testing.assert_array_equal(loaded["D01"].params[0], [0.1, 0.2])
        assert loaded["D01"].posterior is None
        assert loaded["D02"].method == AdaptMethod.PACT_BIAS
        np.testing.assert_array_equal(loaded["D02"].params[2], [0.3])
        np.testing.assert_array_equal(loaded["D02"].posterior.log_var[2], [-3.0])


class TestBudget:
    def test_fraction_and_count(self):
        utts = [f"u{i}" for i in range(20)]
        assert len(select_adaptation_subset(utts, AdaptationBudget(fraction=0.1))) == 2
        assert len(select_adaptation_subset(utts, AdaptationBudget(fraction=0.01))) == 1
        assert len(select_adaptation_subset(utts, AdaptationBudget(utterances=1))) == 1
        assert select_adaptation_subset(utts, AdaptationBudget()) == utts

    def test_seeded_and_ordered(self):
        utts = [f"u{i:02d}" for i in range(30)]
        budget = AdaptationBudget(fraction=0.4)
        first = select_adaptation_subset(utts, budget, seed=7)
        assert first == select_adaptation_subset(utts, budget, seed=7)
        assert first == sorted(first)

    def test_rapid_budgets_shrink(self):
        utts = [f"u{i}" for i in range(100)]
        sizes = [len(select_adaptation_subset(utts, b)) for b in RAPID_ADAPTATION_BUDGETS]
        assert sizes == [80, 40, 10, 1, 1]

    def test_empty(self):
        assert select_adaptation_subset([], AdaptationBudget(fraction=0.5)) == []

    def test_exclusive(self):
        with pytest.raises(ValueError):
            AdaptationBudget(fraction=0.5, utterances=2)

    def test_layers_contiguous(self):
        with pytest.raises(ValueError, match="contiguous"):
            AdaptConfig(layers=[0, 2])


class TestTestTimeAdaptation:
    def test_model_untouched_and_loss_drops(self, trained):
        model, dataset = trained
        data = dataset.by_speaker("S2")
        config = AdaptConfig(layers=[0, 1], transform_lr=0.1, steps=10)
        start = SpeakerTransform.neutral("S2", AdaptMethod.LHUC, [0, 1], model.layer_widths())
        before = model.checksum()
        adapted, log = adapt_transform(model, start, data, config)
        assert model.checksum() == before
        assert len(log) == 11
        assert log[-1]["loss"] < log[0]["loss"]
        assert not np.allclose(adapted.params[0], 0.0)
        np.testing.assert_array_equal(start.params[0], 0.0)

    def test_zero_steps_is_unchanged(self, trained):
        model, dataset = trained
        start = SpeakerTransform.neutral("S1", AdaptMethod.HUB, [1], model.layer_widths())
        adapted, log = adapt_transform(
            model, start, dataset.by_speaker("S1"), AdaptConfig(layers=[1]), steps=0
        )
        np.testing.assert_array_equal(adapted.params[1], start.params[1])
        assert len(log) == 1
        assert log[0]["bayesian"] is False

    def test_adapt_speakers_order_and_jobs(self, trained):
        model, dataset = trained
        datasets = {s: dataset.by_speaker(s) for s in ("S2", "S1")}
        config = AdaptConfig(layers=[0], steps=3, transform_lr=0.1)
        serial, log = adapt_speakers(model, datasets, config)
        parallel, _ = adapt_speakers(model, datasets, config, jobs=2)
        assert list(serial) == ["S1", "S2"]
        assert [r["speaker"] for r in log[:4]] == ["S1"] * 4
        for spk in serial:
            np.testing.assert_array_equal(serial[spk].params[0], parallel[spk].params[0])


class TestBayesian:
    def test_elbo_gradient_matches_finite_differences(self, toy_model, toy_batch):
        x, pt, at = toy_batch
        rng = np.random.default_rng(5)
        post = VariationalPosterior(
            {0: rng.normal(0, 0.05, 8), 1: rng.normal(0, 0.05, 8)},
            {0: np.full(8, math.log(PRIOR)), 1: np.full(8, math.log(PRIOR) + 0.5)},
            PRIOR,
        )
        eps = draw_eps(post, 2, np.random.default_rng(6))
        method = AdaptMethod.LHUC

        def loss():
            return elbo_loss(toy_model, post, method, x, pt, at, n_mc=2, eps=eps).loss

        result = elbo_loss(toy_model, post, method, x, pt, at, n_mc=2, eps=eps)
        assert result.loss == pytest.approx(result.nll + result.kl)
        h = 1e-6
        for store, grad in ((post.mu, result.d_mu), (post.log_var, result.d_log_var)):
            for layer in (0, 1):
                for i in (0, 3, 7):
                    saved = store[layer][i]
                    store[layer][i] = saved + h
                    up = loss()
                    store[layer][i] = saved - h
                    down = loss()
                    store[layer][i] = saved
                    expected = (up - down) / (2 * h)
                    assert grad[layer][i] == pytest.approx(expected, rel=1e-4, abs=1e-6)

    def test_elbo_needs_noise(self, toy_model, toy_batch):
        x, pt, at = toy_batch
        post = VariationalPosterior.from_mean({0: np.zeros(8)}, math.log(PRIOR))
        with pytest.raises(ValueError, match="rng or frozen"):
            elbo_loss(toy_model, post, AdaptMethod.LHUC, x, pt, at)

    def test_bayes_adapt_returns_posterior_mean(self, trained):
        model, dataset = trained
        config = AdaptConfig(layers=[0, 1], bayesian=True, steps=4, transform_lr=0.1, seed=3)
        start = SpeakerTransform.neutral("S2", AdaptMethod.LHUC, [0, 1], model.layer_widths())
        before = model.checksum()
        adapted, log = bayes_adapt(model, dataset.by_speaker("S2"), config, start)
        assert model.checksum() == before
        assert len(log) == 5
        assert all(r["bayesian"] for r in log)
        assert adapted.posterior is not None
        for layer in (0, 1):
            np.testing.assert_array_equal(adapted.params[layer], adapted.posterior.mu[layer])

    def test_bayes_adapt_is_seeded(self, trained):
        model, dataset = trained
        config = AdaptConfig(layers=[0], bayesian=True, steps=2, seed=9)
        start = SpeakerTransform.neutral("S1", AdaptMethod.HUB, [0], model.layer_widths())
        a, _ = bayes_adapt(model, dataset.by_speaker("S1"), config, start)
        b, _ = bayes_adapt(model, dataset.by_speaker("S1"), config, start)
        np.testing.assert_array_equal(a.params[0], b.params[0])


class TestSat:
    def test_joint_training(self, shift_data):
        dataset = shift_data(4, n_per_speaker=80)
        model = HybridDnn(toy_spec(n_states=3, n_phones=2), seed=2)
        before = model.checksum()
        config = AdaptConfig(layers=[0, 1], sat_epochs=2, transform_lr=0.1)
        model, transforms = sat_train(model, dataset, config, TrainConfig(batch=40))
        assert sorted(transforms) == ["S1", "S2"]
        assert model.checksum() != before
        assert not np.allclose(transforms["S1"].params[0], transforms["S2"].params[0])

    def test_zero_epochs_keeps_neutral(self, shift_data):
        dataset = shift_data(4, n_per_speaker=40)
        model = HybridDnn(toy_spec(n_states=3, n_phones=2), seed=2)
        config = AdaptConfig(layers=[0], sat_epochs=0)
        _, transforms = sat_train(model, dataset, config, TrainConfig())
        np.testing.assert_array_equal(transforms["S1"].params[0], 0.0)

    def test_missing_layer(self, shift_data):
        model = HybridDnn(toy_spec(n_states=3, n_phones=2))
        with pytest.raises(ValueError, match="does not exist"):
            sat_train(model, shift_data(0, 40), AdaptConfig(layers=[3]), TrainConfig())


def _accuracy(model: HybridDnn, dataset: FrameDataset, transform: SpeakerTransform) -> float:
    """Frame accuracy with ``transform`` on its speaker and neutral transforms elsewhere."""
    widths = model.layer_widths()
    bank = {
        spk: SpeakerTransform.neutral(spk, transform.method, transform.layers, widths)
        for spk in dataset.speaker_ids
    }
    bank[transform.speaker_id] = transform
    return frame_accuracy(model, dataset, TransformBank(bank, dataset))


def word_dataset(seed: int) -> FrameDataset:
    """
    A training speaker with mixed labels and a test speaker whose six
    utterances each hold one class, like isolated words. The class clusters
    overlap so the speaker independent model is not certain.
    """
    rng = np.random.default_rng([seed, 31])
    centers = rng.standard_normal((3, 6)) * 0.8
    utterances = []
    for u in range(8):
        labels = rng.integers(0, 3, 50)
        frames = centers[labels] + rng.standard_normal((50, 6))
        utterances.append(UtteranceFrames(f"S1_{u}", "S1", frames, labels, labels % 2))
    for u in range(6):
        labels = np.full(40, u % 3)
        frames = centers[labels] + rng.standard_normal((40, 6))
        utterances.append(UtteranceFrames(f"S2_{u}", "S2", frames, labels, labels % 2))
    return FrameDataset.from_utterances(utterances, 0, 0)


@pytest.mark.slow
class TestAdaptationTrends:
    SEEDS = range(5)

    def test_sat_fits_shifted_speakers_better(self):
        spec = toy_spec(n_states=3, n_phones=2)
        for seed in self.SEEDS:
            dataset = shift_dataset(seed, n_per_speaker=400)
            train = dataset.subset([u for u in dataset.utt_ids if not u.endswith("_3")])
            held_out = dataset.subset([u for u in dataset.utt_ids if u.endswith("_3")])
            training = TrainConfig(lr=0.05, batch=50, epochs=6, seed=seed)

            si, _ = train_model(HybridDnn(spec, seed=seed), train, training)
            config = AdaptConfig(layers=[0, 1, 2], sat_epochs=6, sat_lr=0.05, transform_lr=1.0)
            sat, transforms = sat_train(HybridDnn(spec, seed=seed), train, config, training)

            sat_loss = evaluate_loss(sat, train, TransformBank(transforms, train))
            assert sat_loss < evaluate_loss(si, train), f"seed {seed}"
            sat_acc = frame_accuracy(sat, held_out, TransformBank(transforms, held_out))
            assert sat_acc >= frame_accuracy(si, held_out), f"seed {seed}"

    def test_supervised_adaptation_helps_shifted_speaker(self):
        spec = toy_spec(n_states=3, n_phones=2)
        for seed in self.SEEDS:
            dataset = shift_dataset(seed, n_per_speaker=400)
            model, _ = train_model(
                HybridDnn(spec, seed=seed),
                dataset.by_speaker("S1"),
                TrainConfig(lr=0.05, batch=50, epochs=6, seed=seed),
            )
            target = dataset.by_speaker("S2")
            start = SpeakerTransform.neutral("S2", AdaptMethod.LHUC, [0, 1], model.layer_widths())
            config = AdaptConfig(layers=[0, 1], transform_lr=0.2, steps=40)
            adapted, log = adapt_transform(model, start, target, config)
            assert log[-1]["loss"] < log[0]["loss"], f"seed {seed}"
            assert _accuracy(model, target, adapted) >= _accuracy(model, target, start)

    def test_bayesian_beats_point_estimate_on_one_utterance(self):
        spec = toy_spec(n_states=3, n_phones=2)
        budget = AdaptationBudget(utterances=1)
        bayes_acc, point_acc = [], []
        for seed in range(10):
            dataset = word_dataset(seed)
            model, _ = train_model(
                HybridDnn(spec, seed=seed),
                dataset.by_speaker("S1"),
                TrainConfig(lr=0.05, batch=40, epochs=8, seed=seed),
            )
            pool = [f"S2_{u}" for u in range(3)]
            held_out = dataset.subset([f"S2_{u}" for u in range(3, 6)])
            data = dataset.subset(select_adaptation_subset(pool, budget, seed))
            start = SpeakerTransform.neutral(
                "S2", AdaptMethod.LHUC, [0, 1, 2], model.layer_widths()
            )
            point_config = AdaptConfig(layers=[0, 1, 2], transform_lr=1.0, steps=40, seed=seed)
            bayes_config = point_config.model_copy(update={"bayesian": True})
            point, _ = adapt_transform(model, start, data, point_config)
            bayes, _ = bayes_adapt(model, data, bayes_config, start)
            point_acc.append(_accuracy(model, held_out, point))
            bayes_acc.append(_accuracy(model, held_out, bayes))
        assert np.mean(bayes_acc) >= np.mean(point_acc)
        assert paired_sign_test(bayes_acc, point_acc) < 0.1
