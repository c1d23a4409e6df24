"""Fine-tuning orchestration with ablation toggles, evaluation, and sweeps.

Toggles mirror the ablation axes: `use_tpg` picks the fused text matrix over
the plain one, `use_ft` enables adapter training at all, `use_wt` swaps the
hard noisy-label cross-entropy for the top-K weighted objective.  Training is
full-batch (few-shot sets are tiny) and fully deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import adapter, objective, weighting
from .errors import ConfigError
from .store import EmbeddingMatrix, FewShotDataset, NoiseSpec

SIMPLEX_TOL = 1e-9


@dataclass
class TrainConfig:
    alpha: float = 0.8
    beta: float = 0.8
    gamma: float = 0.9
    K: int = 3
    tau: float = 0.01
    lam: float = 0.2
    hidden_ratio: int = 4
    lr: float = 1e-3
    weight_decay: float = 1e-2
    epochs: int = 50
    seed: int = 0
    use_tpg: bool = True
    use_ft: bool = True
    use_wt: bool = True
    noise: NoiseSpec | None = None

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0,1), got {v}")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")

    def adapter_config(self) -> adapter.AdapterConfig:
        return adapter.AdapterConfig(
            hidden_ratio=self.hidden_ratio,
            lam=self.lam,
            tau=self.tau,
            lr=self.lr,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            seed=self.seed,
        )

    def toggles_label(self) -> str:
        parts = [
            name
            for name, on in (("tpg", self.use_tpg), ("ft", self.use_ft), ("wt", self.use_wt))
            if on
        ]
        return "+".join(parts) if parts else "none"


@dataclass
class Metrics:
    """Per-epoch (epoch, split, accuracy percent, mean loss) records."""

    rows: list = field(default_factory=list)

    def append(self, epoch: int, split: str, accuracy: float, loss: float) -> None:
        if not 0.0 <= accuracy <= 100.0:
            raise ConfigError(f"accuracy out of range: {accuracy}")
        self.rows.append((epoch, split, accuracy, loss))

    def to_csv(self) -> str:
        lines = ["epoch,split,accuracy,loss"]
        lines += [f"{e},{s},{a!r},{l!r}" for e, s, a, l in self.rows]
        return "\n".join(lines) + "\n"

    def final_accuracy(self, split: str = "test") -> float:
        return [a for e, s, a, l in self.rows if s == split][-1]

    def best_accuracy(self, split: str = "test") -> float:
        return max(a for e, s, a, l in self.rows if s == split)


def evaluate(
    images: EmbeddingMatrix,
    labels: np.ndarray,
    text: EmbeddingMatrix,
    params: adapter.AdapterParams | None = None,
    tau: float = 0.01,
) -> float:
    """Top-1 accuracy (percent) of argmax cosine, optionally through the adapter."""
    x = images.as_f64()
    if params is not None:
        x = adapter.forward(x, params)
    z = adapter.similarities(x, text, tau)
    pred = z.argmax(axis=1)
    return float(100.0 * (pred == np.asarray(labels)).mean())


def _per_sample_grads(z: np.ndarray, labels: np.ndarray, cfg: TrainConfig, check: bool):
    """Losses and logit gradients for one full batch of logits."""
    losses = np.empty(len(z))
    grads = np.empty_like(z)
    for m in range(len(z)):
        label = int(labels[m])
        if cfg.use_wt:
            wv = weighting.weights_for_sample(
                z[m], label, cfg.K, cfg.alpha, cfg.beta, cfg.gamma
            )
            if check:
                for vec in (wv.w, wv.w_star):
                    if abs(vec.sum() - 1.0) > SIMPLEX_TOL or (vec < 0).any() or (vec > 1).any():
                        raise AssertionError(f"weight vector off the simplex: {vec}")
            so = objective.SampleObjective(z=z[m], candidates=wv.candidates, w_star=wv.w_star)
            losses[m] = objective.weighted_loss(so)
            grads[m] = objective.logit_gradient(so)
        else:
            losses[m], grads[m] = objective.plain_ce(z[m], label)
    return losses, grads


def train(
    ds: FewShotDataset,
    text_fused: EmbeddingMatrix,
    text_plain: EmbeddingMatrix,
    cfg: TrainConfig,
    check_weights: bool = True,
) -> tuple[adapter.AdapterParams, Metrics]:
    """Full-batch fine-tuning on the (noisy) train split.

    Candidate weights are recomputed from the current logits every epoch and
    treated as constants in the gradient.  With `use_ft` off no parameter is
    ever touched and only the zero-shot evaluation row is recorded.
    """
    text = text_fused if cfg.use_tpg else text_plain
    acfg = cfg.adapter_config()
    params = adapter.init_params(ds.images.dims, acfg)

    metrics = Metrics()
    test_x = EmbeddingMatrix(ds.images.data[ds.test_idx], normalized=ds.images.normalized)
    test_y = ds.clean_labels[ds.test_idx]

    if not cfg.use_ft:
        metrics.append(0, "test", evaluate(test_x, test_y, text, None, cfg.tau), math.nan)
        return params, metrics

    train_x = ds.images.as_f64()[ds.train_idx]
    train_y = ds.noisy_labels[ds.train_idx]

    z0 = adapter.similarities(adapter.forward(train_x, params), text, cfg.tau)
    losses0, _ = _per_sample_grads(z0, train_y, cfg, check_weights)
    metrics.append(
        0, "test", evaluate(test_x, test_y, text, params, cfg.tau), float(losses0.mean())
    )

    for epoch in range(cfg.epochs):
        x_star = adapter.forward(train_x, params)
        z = adapter.similarities(x_star, text, cfg.tau)
        losses, grads = _per_sample_grads(z, train_y, cfg, check_weights)
        dW1, dW2 = adapter.backward(train_x, text, params, grads, cfg.tau)
        adapter.optimizer_step(params, (dW1, dW2), epoch, cfg.epochs, acfg)
        metrics.append(
            epoch + 1,
            "test",
            evaluate(test_x, test_y, text, params, cfg.tau),
            float(losses.mean()),
        )
    return params, metrics


DEFAULT_TOGGLE_SETS = (("ft",), ("ft", "wt"))


def _apply_toggles(cfg: TrainConfig, toggles: tuple[str, ...]) -> TrainConfig:
    return replace(
        cfg,
        use_tpg="tpg" in toggles,
        use_ft="ft" in toggles,
        use_wt="wt" in toggles,
    )


def sweep(
    base_cfg: TrainConfig,
    deltas,
    seeds,
    dataset_factory,
    toggle_sets=DEFAULT_TOGGLE_SETS,
    noise_kind: str = "symmetric",
) -> str:
    """Run train+evaluate over the (delta, toggle-set, seed) grid; return CSV.

    `dataset_factory(seed)` must yield a clean (FewShotDataset, prototypes)
    pair; noise is injected here per cell.  Rows are sorted by cell key so
    the output is order-stable.
    """
    from .store import inject_noise

    cells = sorted(
        (float(d), tuple(t), int(s)) for d in deltas for t in toggle_sets for s in seeds
    )
    lines = ["delta,toggles,seed,final_acc,best_acc"]
    for delta, toggles, seed in cells:
        ds, protos = dataset_factory(seed)
        if delta > 0:
            ds = inject_noise(ds, NoiseSpec(kind=noise_kind, delta=delta, seed=seed))
        cfg = _apply_toggles(replace(base_cfg, seed=seed), toggles)
        _, metrics = train(ds, protos, protos, cfg)
        label = cfg.toggles_label()
        lines.append(
            f"{delta!r},{label},{seed},{metrics.final_accuracy()!r},{metrics.best_accuracy()!r}"
        )
    return "\n".join(lines) + "\n"
