"""Perturbation strategies: blending identities, descent fixed points, sequences."""

import numpy as np
import pytest

from livesketch.jointspace import init_fc_stack, project_latent
from livesketch.perturb import (
    PerturbationEngine,
    PerturbationRequest,
    PerturbTarget,
    blend_linear,
    blend_spherical,
    descend_latent,
    distance_report,
)
from livesketch.seqvae import init_decoder

RNG = np.random.default_rng(1717)
DIM = 6


def fc_stack(seed=0):
    return init_fc_stack(np.random.default_rng(seed), DIM, 5, 8, 4)


def target_for(fc, latent):
    return PerturbTarget(latent=latent, search=project_latent(latent, fc))


def request(fc, query, targets, weights, method, **kw):
    return PerturbationRequest(query_latent=query, targets=[target_for(fc, t) for t in targets],
                               weights=weights, method=method, **kw)


def engine(fc, seed=0):
    return PerturbationEngine(fc=fc, decoder=init_decoder(np.random.default_rng(seed), DIM, 8),
                              max_decode_steps=12)


class TestLinear:
    def test_zero_weights_identity(self):
        fc = fc_stack()
        q = RNG.standard_normal(DIM)
        req = request(fc, q, [RNG.standard_normal(DIM)], [0.0], "linear")
        np.testing.assert_array_equal(blend_linear(req), q)

    def test_unit_weight_reaches_target(self):
        fc = fc_stack()
        q = RNG.standard_normal(DIM)
        t = RNG.standard_normal(DIM)
        req = request(fc, q, [t], [1.0], "linear")
        np.testing.assert_allclose(blend_linear(req), t, atol=1e-12)

    def test_two_target_midpoint_formula(self):
        fc = fc_stack()
        q = RNG.standard_normal(DIM)
        t1, t2 = RNG.standard_normal((2, DIM))
        req = request(fc, q, [t1, t2], [0.5, 0.5], "linear")
        expected = q + 0.5 * (t1 - q) + 0.5 * (t2 - q)
        np.testing.assert_allclose(blend_linear(req), expected, atol=1e-12)


class TestSpherical:
    def test_zero_weight_identity(self):
        fc = fc_stack()
        q = RNG.standard_normal(DIM)
        out, fb = blend_spherical(request(fc, q, [RNG.standard_normal(DIM)], [0.0], "slerp"))
        np.testing.assert_array_equal(out, q)
        assert not fb

    def test_unit_weight_reaches_target(self):
        fc = fc_stack()
        q = RNG.standard_normal(DIM)
        t = RNG.standard_normal(DIM)
        out, _ = blend_spherical(request(fc, q, [t], [1.0], "slerp"))
        np.testing.assert_allclose(out, t, atol=1e-9)

    def test_orthogonal_unit_vectors_give_45_degrees(self):
        fc = fc_stack()
        a = np.zeros(DIM)
        b = np.zeros(DIM)
        a[0] = 1.0
        b[1] = 1.0
        out, _ = blend_spherical(request(fc, a, [b], [0.5], "slerp"))
        assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)
        assert out @ a == pytest.approx(np.cos(np.pi / 4), abs=1e-12)
        assert out @ b == pytest.approx(np.cos(np.pi / 4), abs=1e-12)

    def test_antiparallel_falls_back_to_linear(self):
        fc = fc_stack()
        a = np.zeros(DIM)
        a[0] = 1.0
        out, fb = blend_spherical(request(fc, a, [-a], [0.5], "slerp"))
        assert fb
        np.testing.assert_allclose(out, np.zeros(DIM), atol=1e-12)

    def test_small_weight_continuity(self):
        fc = fc_stack()
        q = RNG.standard_normal(DIM)
        t = RNG.standard_normal(DIM)
        for method, fn in (("linear", lambda r: blend_linear(r)), ("slerp", lambda r: blend_spherical(r)[0])):
            out = fn(request(fc, q, [t], [1e-6], method))
            assert np.linalg.norm(out - q) < 1e-3


class TestDescent:
    def test_all_zero_weights_fixed_point(self):
        fc = fc_stack(seed=2)
        q = RNG.standard_normal(DIM)
        req = request(fc, q, [RNG.standard_normal(DIM)], [0.0], "backprop", steps=50)
        best, trace, aborted = descend_latent(req, fc)
        assert not aborted
        assert np.linalg.norm(best - q) < 1e-6
        assert len(trace) == 51

    def test_best_iterate_never_worse_than_initial(self):
        fc = fc_stack(seed=3)
        for _ in range(5):
            q = RNG.standard_normal(DIM)
            t = RNG.standard_normal(DIM)
            req = request(fc, q, [t], [1.0], "backprop", steps=60)
            best, trace, _ = descend_latent(req, fc)
            assert min(trace) <= trace[0] + 1e-12

    def test_descent_reduces_target_distance_on_random_stack(self):
        fc = fc_stack(seed=4)
        eng = engine(fc)
        q = RNG.standard_normal(DIM)
        t = RNG.standard_normal(DIM)
        req = request(fc, q, [t], [1.0], "backprop", steps=120)
        res = eng.perturb(req)
        assert res.distances_after[0] < res.distances_before[0]
        assert res.loss_trace[-1] < res.loss_trace[0]

    def test_weight_clamping(self):
        fc = fc_stack()
        req = request(fc, RNG.standard_normal(DIM), [RNG.standard_normal(DIM)], [2.5], "linear")
        assert req.weights == [1.0]

    def test_mismatched_weights_rejected(self):
        fc = fc_stack()
        with pytest.raises(ValueError):
            request(fc, RNG.standard_normal(DIM), [RNG.standard_normal(DIM)], [0.5, 0.5], "linear")

    def test_unknown_method_rejected(self):
        fc = fc_stack()
        with pytest.raises(ValueError):
            request(fc, RNG.standard_normal(DIM), [RNG.standard_normal(DIM)], [0.5], "teleport")


class TestEngine:
    def test_result_invariants(self):
        fc = fc_stack(seed=5)
        eng = engine(fc)
        q = RNG.standard_normal(DIM)
        res = eng.perturb(request(fc, q, [RNG.standard_normal(DIM)], [0.7], "backprop", steps=30))
        assert res.suggestion.points[-1, 2] == 1
        assert len(res.loss_trace) >= 1
        assert len(res.distances_before) == len(res.distances_after) == 1
        # suggestion is the decode of the returned latent
        from livesketch.seqvae import decode

        again = decode(res.new_latent, eng.decoder, max_steps=eng.max_decode_steps)
        assert again.sketch == res.suggestion

    def test_methods_deterministic(self):
        fc = fc_stack(seed=6)
        eng = engine(fc)
        q = RNG.standard_normal(DIM)
        t = RNG.standard_normal(DIM)
        for method in ("linear", "slerp", "backprop"):
            r1 = eng.perturb(request(fc, q, [t], [0.6], method, steps=40))
            r2 = eng.perturb(request(fc, q, [t], [0.6], method, steps=40))
            np.testing.assert_array_equal(r1.new_latent, r2.new_latent)
            assert r1.suggestion == r2.suggestion

    def test_noop_report_before_equals_after(self):
        fc = fc_stack(seed=7)
        eng = engine(fc)
        q = RNG.standard_normal(DIM)
        res = eng.perturb(request(fc, q, [RNG.standard_normal(DIM)], [0.0], "linear"))
        assert res.distances_before == res.distances_after
        rep = distance_report(res)
        assert rep["delta"] == [0.0]

    def test_report_matches_direct_recomputation(self):
        fc = fc_stack(seed=8)
        eng = engine(fc)
        q = RNG.standard_normal(DIM)
        t = RNG.standard_normal(DIM)
        res = eng.perturb(request(fc, q, [t], [1.0], "linear"))
        ts = project_latent(t, fc)
        before = float(np.linalg.norm(project_latent(q, fc) - ts))
        after = float(np.linalg.norm(project_latent(res.new_latent, fc) - ts))
        assert res.distances_before[0] == pytest.approx(before, abs=1e-12)
        assert res.distances_after[0] == pytest.approx(after, abs=1e-12)


class TestSequences:
    def test_first_step_decodes_the_query_end(self):
        fc = fc_stack(seed=9)
        eng = engine(fc)
        q = RNG.standard_normal(DIM)
        t = RNG.standard_normal(DIM)
        seq = eng.interpolation_sequence(request(fc, q, [t], [1.0], "linear"), steps=10)
        assert len(seq) == 10
        np.testing.assert_allclose(seq[0].new_latent, q, atol=1e-12)

    def test_final_linear_step_reaches_target_latent(self):
        fc = fc_stack(seed=10)
        eng = engine(fc)
        q = RNG.standard_normal(DIM)
        t = RNG.standard_normal(DIM)
        seq = eng.interpolation_sequence(request(fc, q, [t], [1.0], "linear"), steps=10)
        np.testing.assert_allclose(seq[-1].new_latent, t, atol=1e-12)

    def test_minimum_two_steps(self):
        fc = fc_stack()
        eng = engine(fc)
        with pytest.raises(ValueError):
            eng.interpolation_sequence(request(fc, RNG.standard_normal(DIM),
                                               [RNG.standard_normal(DIM)], [1.0], "linear"), steps=1)
