import numpy as np
import pytest

from crof.errors import ConfigError
from crof.store import EmbeddingMatrix, NoiseSpec, generate_synthetic, inject_noise
from crof.trainer import TrainConfig, evaluate, sweep, train


@pytest.fixture(scope="module")
def small_data():
    return generate_synthetic(n_classes=8, dims=16, shots=6, test_per_class=10, sigma=0.4, seed=5)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(alpha=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(K=0)


class TestEvaluate:
    def test_perfectly_separable(self):
        ds, protos = generate_synthetic(5, 8, 3, 4, sigma=0.0, seed=0)
        test = EmbeddingMatrix(ds.images.data[ds.test_idx], normalized=True)
        assert evaluate(test, ds.clean_labels[ds.test_idx], protos) == 100.0

    def test_permuted_labels_near_chance(self):
        ds, protos = generate_synthetic(20, 32, 5, 100, sigma=0.2, seed=1)
        rng = np.random.default_rng(0)
        test = EmbeddingMatrix(ds.images.data[ds.test_idx], normalized=True)
        shuffled = rng.permutation(ds.clean_labels[ds.test_idx])
        acc = evaluate(test, shuffled, protos)
        assert acc < 12.0  # chance is 5% on 20 classes

    def test_identity_adapter_matches_no_adapter(self, small_data):
        ds, protos = small_data
        from crof.adapter import AdapterConfig, init_params

        params = init_params(ds.images.dims, AdapterConfig(lam=0.0, seed=0))
        test = EmbeddingMatrix(ds.images.data[ds.test_idx], normalized=True)
        labels = ds.clean_labels[ds.test_idx]
        assert evaluate(test, labels, protos, params) == evaluate(test, labels, protos, None)


class TestTrain:
    def test_zero_epochs_returns_init_and_one_row(self, small_data):
        ds, protos = small_data
        params, metrics = train(ds, protos, protos, TrainConfig(epochs=0, seed=1))
        assert params.step == 0
        assert len(metrics.rows) == 1
        assert metrics.rows[0][0] == 0

    def test_metrics_row_per_epoch(self, small_data):
        ds, protos = small_data
        _, metrics = train(ds, protos, protos, TrainConfig(epochs=5, seed=1))
        assert [row[0] for row in metrics.rows] == [0, 1, 2, 3, 4, 5]

    def test_ft_off_never_mutates_params(self, small_data):
        ds, protos = small_data
        cfg = TrainConfig(epochs=5, seed=2, use_ft=False)
        params, metrics = train(ds, protos, protos, cfg)
        from crof.adapter import init_params

        fresh = init_params(ds.images.dims, cfg.adapter_config())
        assert np.array_equal(params.W1, fresh.W1)
        assert np.array_equal(params.W2, fresh.W2)
        assert params.step == 0
        assert len(metrics.rows) == 1

    def test_weight_simplex_enforced_during_training(self, small_data):
        # check_weights=True raises if any produced vector leaves the simplex
        ds, protos = small_data
        noisy = inject_noise(ds, NoiseSpec("symmetric", 0.5, seed=3))
        train(noisy, protos, protos, TrainConfig(epochs=3, seed=3), check_weights=True)

    def test_deterministic_metrics(self, small_data):
        ds, protos = small_data
        noisy = inject_noise(ds, NoiseSpec("symmetric", 0.4, seed=0))
        cfg = TrainConfig(epochs=4, seed=9)
        _, m1 = train(noisy, protos, protos, cfg)
        _, m2 = train(noisy, protos, protos, cfg)
        assert m1.to_csv() == m2.to_csv()

    def test_tpg_toggle_selects_text_matrix(self, small_data):
        ds, protos = small_data
        rng = np.random.default_rng(4)
        other_raw = protos.as_f64() + 0.5 * rng.standard_normal(protos.data.shape)
        other_raw /= np.linalg.norm(other_raw, axis=1, keepdims=True)
        other = EmbeddingMatrix(other_raw.astype(np.float32), normalized=True)

        _, with_tpg = train(ds, other, protos, TrainConfig(epochs=2, seed=0, use_tpg=True))
        _, against_other = train(ds, other, other, TrainConfig(epochs=2, seed=0, use_tpg=False))
        assert with_tpg.to_csv() == against_other.to_csv()


class TestSweep:
    def factory(self, seed):
        return generate_synthetic(6, 8, 4, 5, 0.3, seed=seed)

    def test_zero_delta_matches_direct_evaluate(self):
        cfg = TrainConfig(epochs=3, seed=0)
        csv = sweep(cfg, [0.0], [7], self.factory, toggle_sets=[()])
        row = csv.strip().splitlines()[1].split(",")
        ds, protos = self.factory(7)
        test = EmbeddingMatrix(ds.images.data[ds.test_idx], normalized=True)
        direct = evaluate(test, ds.clean_labels[ds.test_idx], protos, None, cfg.tau)
        assert row[1] == "none"
        assert float(row[3]) == direct

    def test_grid_shape_and_ranges(self):
        cfg = TrainConfig(epochs=2, seed=0)
        csv = sweep(cfg, [0.0, 0.5], [0, 1], self.factory, toggle_sets=[("ft",), ("ft", "wt")])
        lines = csv.strip().splitlines()
        assert lines[0] == "delta,toggles,seed,final_acc,best_acc"
        assert len(lines) == 1 + 2 * 2 * 2
        for line in lines[1:]:
            _, _, _, final, best = line.split(",")
            assert 0.0 <= float(final) <= 100.0
            assert float(best) >= float(final) - 1e-12

    def test_deterministic_csv(self):
        cfg = TrainConfig(epochs=2, seed=0)
        a = sweep(cfg, [0.4], [0, 1], self.factory)
        b = sweep(cfg, [0.4], [0, 1], self.factory)
        assert a == b
