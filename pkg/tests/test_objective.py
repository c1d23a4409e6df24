import math

import numpy as np
import pytest

from crof.objective import SampleObjective, logit_gradient, plain_ce, weighted_loss


def so(z, candidates, w_star):
    return SampleObjective(
        z=np.asarray(z, dtype=float),
        candidates=np.asarray(candidates),
        w_star=np.asarray(w_star, dtype=float),
    )


class TestWeightedLoss:
    def test_certain_correct_prediction_is_zero(self):
        s = so([1000.0, 0.0, 0.0], [0], [1.0])
        assert weighted_loss(s) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_prediction_gives_log_n(self):
        s = so([0.0, 0.0, 0.0, 0.0], [1, 3], [0.5, 0.5])
        assert weighted_loss(s) == pytest.approx(math.log(4.0), abs=1e-12)

    def test_hand_arithmetic(self):
        # p = [0.5, 0.25, 0.25] via logits log(2), log(1), log(1)
        z = np.log([2.0, 1.0, 1.0])
        s = so(z, [0, 1], [0.6, 0.4])
        expected = 0.6 * math.log(2.0) + 0.4 * math.log(4.0)
        assert weighted_loss(s) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.97041, abs=1e-4)


class TestLogitGradient:
    def test_symmetric_two_class(self):
        s = so([0.0, 0.0], [0], [1.0])
        assert np.allclose(logit_gradient(s), [-0.5, 0.5], atol=1e-15)

    def test_fixed_point_zero_gradient(self):
        # p == sum_k w*_k onehot(c_k) exactly
        w = np.array([0.25, 0.75])
        z = np.log(w)
        s = so(z, [0, 1], w)
        assert np.abs(logit_gradient(s)).max() < 1e-12

    def test_components_sum_to_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = rng.integers(2, 12)
            k = int(rng.integers(1, n + 1))
            w = rng.dirichlet(np.ones(k))
            cands = rng.choice(n, size=k, replace=False)
            s = so(rng.standard_normal(n) * 10, cands, w)
            assert abs(logit_gradient(s).sum()) < 1e-12

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        eps = 1e-7
        for _ in range(30):
            n = rng.integers(2, 8)
            k = int(rng.integers(1, n + 1))
            w = rng.dirichlet(np.ones(k))
            cands = rng.choice(n, size=k, replace=False)
            z = rng.standard_normal(n) * 3
            s = so(z, cands, w)
            ana = logit_gradient(s)
            num = np.zeros(n)
            for i in range(n):
                zp, zm = z.copy(), z.copy()
                zp[i] += eps
                zm[i] -= eps
                num[i] = (weighted_loss(so(zp, cands, w)) - weighted_loss(so(zm, cands, w))) / (2 * eps)
            rel = np.abs(ana - num).max() / max(np.abs(ana).max(), np.abs(num).max(), 1e-12)
            assert rel < 1e-6

    def test_shift_equivariance(self):
        s1 = so([1.0, 2.0, 0.5], [2, 0], [0.3, 0.7])
        s2 = so(np.array([1.0, 2.0, 0.5]) + 100.0, [2, 0], [0.3, 0.7])
        assert np.allclose(logit_gradient(s1), logit_gradient(s2), atol=1e-12)
        assert weighted_loss(s1) == pytest.approx(weighted_loss(s2), abs=1e-9)


class TestPlainCe:
    def test_bitwise_equal_to_one_hot_weighted_path(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = rng.integers(2, 10)
            z = rng.standard_normal(n) * 50
            label = int(rng.integers(0, n))
            loss, grad = plain_ce(z, label)
            s = so(z, [label], [1.0])
            assert loss == weighted_loss(s)
            assert np.array_equal(grad, logit_gradient(s))

    def test_uniform_loss(self):
        loss, _ = plain_ce(np.zeros(3), 1)
        assert loss == pytest.approx(math.log(3.0), abs=1e-12)

    def test_gradient_sums_to_zero(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            _, grad = plain_ce(rng.standard_normal(6) * 20, int(rng.integers(0, 6)))
            assert abs(grad.sum()) < 1e-12
