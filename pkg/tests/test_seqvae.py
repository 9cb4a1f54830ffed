"""Sequence VAE: loss formulas, clamping, sampling, encoding/decoding contracts."""

import numpy as np
import pytest

from livesketch import seqvae
from livesketch.seqvae import (
    LOG_VAR_CEILING,
    VaeConfig,
    covariance_clamp,
    decode,
    encode,
    init_decoder,
    init_encoder,
    kl_loss,
    sample_latent,
    train_vae,
)
from livesketch.sketch import Sketch, sketch_from_absolute, shuffle_strokes

RNG = np.random.default_rng(31337)


def make_sketch(n=8, strokes=2, label=None, rng=RNG):
    parts = [np.cumsum(rng.uniform(-1, 1, size=(n, 2)), axis=0) + rng.uniform(-3, 3, 2) for _ in range(strokes)]
    s = sketch_from_absolute(parts)
    return Sketch(s.points, label=label)


class TestKlLoss:
    def test_standard_normal_case_is_exactly_zero(self):
        assert kl_loss(np.zeros(8), np.zeros(8)) == 0.0

    def test_unit_mean_single_dimension(self):
        mu = np.zeros(6)
        mu[0] = 1.0
        assert kl_loss(mu, np.zeros(6)) == pytest.approx(0.5, abs=1e-15)

    def test_matches_closed_form_on_random_inputs(self):
        for _ in range(20):
            mu = RNG.standard_normal((4, 7))
            lv = RNG.uniform(-3, 1, size=(4, 7))
            expected = float(np.mean([-0.5 * np.sum(1 + l - m**2 - np.exp(l)) for m, l in zip(mu, lv)]))
            assert kl_loss(mu, lv) == pytest.approx(expected, rel=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            kl_loss(np.zeros(3), np.zeros(4))


class TestCovarianceClamp:
    def test_zero_log_var_clamps_to_ceiling(self):
        out = covariance_clamp(np.zeros(5))
        np.testing.assert_allclose(out, LOG_VAR_CEILING)
        np.testing.assert_allclose(np.exp(out), 1e-2)

    def test_small_variance_untouched(self):
        lv = np.full(4, np.log(1e-3))
        np.testing.assert_array_equal(covariance_clamp(lv), lv)

    def test_random_vectors_bounded(self):
        lv = RNG.uniform(-8, 4, size=200)
        assert np.all(np.exp(covariance_clamp(lv)) <= 1e-2 + 1e-12)


class TestEncode:
    def setup_method(self):
        self.enc = init_encoder(np.random.default_rng(1), latent_dim=8, hidden=12, classes=["a", "b"])

    def test_deterministic_path_returns_mu(self):
        code = encode(make_sketch(), self.enc, sample=False)
        np.testing.assert_array_equal(code.batch_z, code.mu)

    def test_same_sketch_same_code(self):
        s = make_sketch()
        a = encode(s, self.enc)
        b = encode(s, self.enc)
        np.testing.assert_array_equal(a.mu, b.mu)
        np.testing.assert_array_equal(a.z0, b.z0)

    def test_sampled_path_differs_and_is_seeded(self):
        s = make_sketch()
        a = encode(s, self.enc, sample=True, rng=np.random.default_rng(5))
        b = encode(s, self.enc, sample=True, rng=np.random.default_rng(5))
        c = encode(s, self.enc, sample=True, rng=np.random.default_rng(6))
        np.testing.assert_array_equal(a.batch_z, b.batch_z)
        assert not np.array_equal(a.batch_z, c.batch_z)

    def test_stroke_shuffle_changes_code(self):
        s = make_sketch(strokes=2)
        shuffled = shuffle_strokes(s, seed=1)
        assert not np.array_equal(encode(s, self.enc).mu, encode(shuffled, self.enc).mu)

    def test_variance_ceiling_enforced_by_encoder_head(self):
        for _ in range(10):
            code = encode(make_sketch(rng=RNG), self.enc)
            assert np.all(np.exp(code.log_var) <= 1e-2 + 1e-12)

    def test_over_length_sketch_rejected(self):
        s = make_sketch(n=40, strokes=3)
        with pytest.raises(ValueError):
            encode(s, self.enc, max_len=16)


class TestSampling:
    def test_reparameterized_mean_within_three_standard_errors(self):
        mu = RNG.standard_normal(6)
        lv = np.full(6, np.log(4e-3))
        draws = np.stack([sample_latent(mu, lv, np.random.default_rng(i)) for i in range(10_000)])
        se = np.sqrt(np.exp(lv)) / np.sqrt(len(draws))
        assert np.all(np.abs(draws.mean(axis=0) - mu) <= 3 * se)


class TestDecode:
    def test_greedy_rollout_is_deterministic(self):
        dec = init_decoder(np.random.default_rng(2), latent_dim=8, hidden=12)
        z = RNG.standard_normal(8)
        a = decode(z, dec, max_steps=20)
        b = decode(z, dec, max_steps=20)
        assert a.sketch == b.sketch

    def test_untrained_params_still_terminate(self):
        for seed in range(5):
            dec = init_decoder(np.random.default_rng(seed), latent_dim=8, hidden=12)
            out = decode(RNG.standard_normal(8), dec, max_steps=25)
            assert 1 <= out.steps <= 25
            assert out.sketch.points[-1, 2] == 1
            if out.steps < 25:
                assert not out.hit_max_steps

    def test_max_steps_flagged(self):
        dec = init_decoder(np.random.default_rng(3), latent_dim=8, hidden=12)
        # push the end-logit bias far negative so the rollout never stops early
        dec.b_out.data[3] = -50.0
        out = decode(RNG.standard_normal(8), dec, max_steps=10)
        assert out.hit_max_steps and out.steps == 10


class TestTraining:
    def _corpus(self, n=24):
        rng = np.random.default_rng(9)
        out = []
        for i in range(n):
            label = "a" if i % 2 == 0 else "b"
            base = make_sketch(n=6, strokes=1, rng=rng)
            pts = base.points.copy()
            if label == "b":
                pts[:, :2] *= -1.0
            out.append(Sketch(pts, label=label))
        return out

    def test_total_is_sum_of_three_terms(self):
        corpus = self._corpus()
        enc = init_encoder(np.random.default_rng(1), 6, 8, ["a", "b"])
        dec = init_decoder(np.random.default_rng(2), 6, 8)
        points, mask = seqvae.pad_batch(corpus[:4])
        labels = np.array([0, 1, 0, 1])
        total, parts = seqvae.vae_batch_loss(points, mask, labels, enc, dec, eps=None)
        assert total.item() == pytest.approx(parts.reconstruction + parts.kl + parts.classification, rel=1e-12)
        assert parts.total == pytest.approx(total.item(), rel=1e-12)

    def test_loss_decreases_over_first_epochs(self):
        cfg = VaeConfig(latent_dim=6, encoder_hidden=8, decoder_hidden=8, max_len=16,
                        epochs=6, batch_size=8, learning_rate=3e-3, seed=4)
        _, _, curve = train_vae(self._corpus(), cfg)
        first = np.mean([curve[0]["total"], curve[1]["total"]])
        last = np.mean([curve[-2]["total"], curve[-1]["total"]])
        assert last < first

    def test_single_class_corpus_rejected(self):
        corpus = [make_sketch(label="only") for _ in range(4)]
        with pytest.raises(ValueError):
            train_vae(corpus, VaeConfig(latent_dim=4, encoder_hidden=6, decoder_hidden=6, epochs=1))

    def test_checkpoint_round_trip(self, tmp_path):
        enc = init_encoder(np.random.default_rng(1), 6, 8, ["a", "b"])
        dec = init_decoder(np.random.default_rng(2), 6, 8)
        seqvae.save_vae(tmp_path / "vae.npz", enc, dec)
        enc2, dec2 = seqvae.load_vae(tmp_path / "vae.npz")
        s = make_sketch()
        np.testing.assert_array_equal(encode(s, enc).mu, encode(s, enc2).mu)
        z = RNG.standard_normal(6)
        assert decode(z, dec, 12).sketch == decode(z, dec2, 12).sketch
        assert enc2.classes == ["a", "b"]
