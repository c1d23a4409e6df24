import math

import numpy as np
import pytest

from crof import adapter
from crof.adapter import (
    AdapterConfig,
    AdapterParams,
    ce_loss,
    cosine_lr,
    forward,
    init_params,
    load_params,
    optimizer_step,
    probabilities,
    save_params,
    similarities,
)
from crof.errors import ConfigError, DegenerateInputError, ShapeError
from crof.store import EmbeddingMatrix


def unit_rows(a):
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def text_matrix(n, d, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix(unit_rows(rng.standard_normal((n, d))).astype(np.float32), normalized=True)


class TestInit:
    def test_shapes(self):
        p = init_params(32, AdapterConfig(hidden_ratio=4, seed=1))
        assert p.W1.shape == (32, 8)
        assert p.W2.shape == (8, 32)

    def test_deterministic(self):
        cfg = AdapterConfig(seed=9)
        a, b = init_params(16, cfg), init_params(16, cfg)
        assert np.array_equal(a.W1, b.W1)
        assert np.array_equal(a.W2, b.W2)

    def test_hidden_clamped_to_one(self):
        p = init_params(3, AdapterConfig(hidden_ratio=4))
        assert p.hidden == 1

    def test_bound_scale(self):
        p = init_params(64, AdapterConfig(hidden_ratio=4, seed=0))
        assert np.abs(p.W1).max() <= 1 / math.sqrt(64)
        assert np.abs(p.W2).max() <= 1 / math.sqrt(16)


class TestForward:
    def test_lambda_zero_is_identity(self):
        rng = np.random.default_rng(0)
        p = init_params(8, AdapterConfig(lam=0.0, seed=0))
        x = rng.standard_normal((4, 8))
        assert np.array_equal(forward(x, p), x)

    def test_zero_w2_scales_input(self):
        p = init_params(8, AdapterConfig(lam=0.3, seed=0))
        p.W2[:] = 0.0
        x = np.random.default_rng(1).standard_normal((3, 8))
        assert np.allclose(forward(x, p), 0.7 * x, atol=1e-15)

    def test_hand_computed_example(self):
        p = AdapterParams(W1=np.array([[1.0], [1.0]]), W2=np.array([[1.0, 1.0]]), lam=0.2)
        out = forward(np.array([[1.0, 0.0]]), p)
        assert np.allclose(out, [[1.0, 0.2]], atol=1e-15)

    def test_dim_mismatch(self):
        p = init_params(8, AdapterConfig())
        with pytest.raises(ShapeError):
            forward(np.ones((2, 5)), p)


class TestSimilarities:
    def test_self_similarity_is_max(self):
        text = text_matrix(5, 8, seed=2)
        z = similarities(text.as_f64()[3], text, tau=1.0)
        assert z[3] == pytest.approx(1.0, abs=1e-12)
        assert z.argmax() == 3

    def test_orthogonal_is_zero(self):
        text = EmbeddingMatrix(np.eye(4, dtype=np.float32), normalized=True)
        z = similarities(np.array([0.0, 0.0, 0.0, 1.0]), text, tau=1.0)
        assert z[0] == pytest.approx(0.0, abs=1e-12)

    def test_temperature_scaling(self):
        # cos = 0.5 at tau = 0.01 gives logit 50; the raw exp(50) similarity
        # never needs to be materialized
        text = EmbeddingMatrix(np.eye(2, dtype=np.float32), normalized=True)
        x = np.array([0.5, math.sqrt(0.75)])
        z = similarities(x, text, tau=0.01)
        assert z[0] == pytest.approx(50.0, abs=1e-9)

    def test_zero_norm_rejected(self):
        with pytest.raises(DegenerateInputError):
            similarities(np.zeros(4), text_matrix(3, 4), tau=1.0)


class TestProbabilities:
    def test_equal_logits_uniform(self):
        assert np.allclose(probabilities(np.array([3.7, 3.7])), [0.5, 0.5], atol=1e-15)

    def test_closed_form(self):
        p = probabilities(np.array([0.0, math.log(3.0)]))
        assert np.allclose(p, [0.25, 0.75], atol=1e-12)

    def test_shift_invariance(self):
        z = np.array([1.0, -2.0, 0.3])
        # +1000 is not exactly representable relative to 0.3, so equality
        # holds to rounding, not bitwise
        assert np.allclose(probabilities(z), probabilities(z + 1000.0), atol=1e-12)

    def test_sums_to_one_and_argmax(self):
        rng = np.random.default_rng(4)
        z = rng.standard_normal(20) * 100
        p = probabilities(z)
        assert abs(p.sum() - 1.0) < 1e-12
        assert p.argmax() == z.argmax()


class TestCeLoss:
    def test_certain_prediction_zero_loss(self):
        z = np.array([1000.0, 0.0, 0.0])
        assert ce_loss(z, 0) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_is_log_n(self):
        assert ce_loss(np.zeros(4), 2) == pytest.approx(math.log(4.0), abs=1e-12)

    def test_from_softmax_example(self):
        assert ce_loss(np.array([0.0, math.log(3.0)]), 0) == pytest.approx(
            1.3862944, abs=1e-6
        )


class TestBackward:
    def test_zero_logit_grads_give_zero(self):
        rng = np.random.default_rng(0)
        p = init_params(6, AdapterConfig(seed=0))
        x = rng.standard_normal((3, 6))
        dW1, dW2 = adapter.backward(x, text_matrix(4, 6), p, np.zeros((3, 4)), tau=0.1)
        assert not dW1.any() and not dW2.any()

    def test_lambda_zero_gives_zero(self):
        rng = np.random.default_rng(1)
        p = init_params(6, AdapterConfig(lam=0.0, seed=1))
        x = rng.standard_normal((2, 6))
        g = rng.standard_normal((2, 4))
        dW1, dW2 = adapter.backward(x, text_matrix(4, 6), p, g, tau=0.1)
        assert np.abs(dW1).max() == 0.0
        assert np.abs(dW2).max() == 0.0

    def test_matches_finite_differences(self):
        # central differences through the full cos/normalization pipeline,
        # random loss direction fixed via random logit grads
        rng = np.random.default_rng(7)
        d, n, B, h = 4, 3, 2, 2
        x = rng.standard_normal((B, d))
        text = text_matrix(n, d, seed=8)
        p = AdapterParams(
            W1=rng.standard_normal((d, h)) * 0.5,
            W2=rng.standard_normal((h, d)) * 0.5,
            lam=0.4,
        )
        G = rng.standard_normal((B, n))
        tau = 0.2

        def scalar_loss(W1, W2):
            pp = AdapterParams(W1=W1, W2=W2, lam=p.lam)
            z = similarities(forward(x, pp), text, tau)
            return float((G * z).sum() / B)

        dW1, dW2 = adapter.backward(x, text, p, G, tau)
        eps = 1e-6
        for W, dW, which in ((p.W1, dW1, "W1"), (p.W2, dW2, "W2")):
            num = np.zeros_like(W)
            it = np.nditer(W, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                Wp, Wm = W.copy(), W.copy()
                Wp[i] += eps
                Wm[i] -= eps
                if which == "W1":
                    num[i] = (scalar_loss(Wp, p.W2) - scalar_loss(Wm, p.W2)) / (2 * eps)
                else:
                    num[i] = (scalar_loss(p.W1, Wp) - scalar_loss(p.W1, Wm)) / (2 * eps)
            rel = np.abs(num - dW).max() / max(np.abs(num).max(), np.abs(dW).max())
            assert rel < 1e-5


class TestOptimizer:
    def test_cosine_schedule_endpoints(self):
        assert cosine_lr(1e-3, 0, 100) == pytest.approx(1e-3)
        assert cosine_lr(1e-3, 50, 100) == pytest.approx(5e-4)

    def test_zero_grad_zero_decay_no_change(self):
        p = init_params(8, AdapterConfig(seed=0))
        before = (p.W1.copy(), p.W2.copy())
        cfg = AdapterConfig(weight_decay=0.0, seed=0)
        optimizer_step(p, (np.zeros_like(p.W1), np.zeros_like(p.W2)), 0, 10, cfg)
        assert np.array_equal(p.W1, before[0])
        assert np.array_equal(p.W2, before[1])

    def test_step_magnitude_bounded_by_lr(self):
        # Adam's unit-variance normalization caps |update| near lr
        p = init_params(8, AdapterConfig(seed=3))
        before = p.W1.copy()
        cfg = AdapterConfig(lr=1e-3, weight_decay=0.0, seed=3)
        g = np.random.default_rng(0).standard_normal(p.W1.shape)
        optimizer_step(p, (g, np.zeros_like(p.W2)), 0, 10, cfg)
        assert np.abs(p.W1 - before).max() <= 1.01e-3

    def test_step_past_total_rejected(self):
        p = init_params(8, AdapterConfig(seed=0))
        with pytest.raises(ConfigError):
            optimizer_step(p, (np.zeros_like(p.W1), np.zeros_like(p.W2)), 10, 10, AdapterConfig())


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        p = init_params(8, AdapterConfig(lam=0.25, seed=5))
        p.step = 17
        save_params(p, tmp_path)
        back = load_params(tmp_path)
        assert back.lam == 0.25
        assert back.step == 17
        assert np.allclose(back.W1, p.W1, atol=1e-7)
        assert np.allclose(back.W2, p.W2, atol=1e-7)

    def test_hidden_one_serializes(self, tmp_path):
        p = init_params(3, AdapterConfig(hidden_ratio=4, seed=0))
        save_params(p, tmp_path)
        assert load_params(tmp_path).W1.shape == (3, 1)
