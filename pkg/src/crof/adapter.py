"""Residual two-layer adapter over frozen image features.

Forward pass (per row):  x* = (1 - lambda) * x + lambda * relu(x @ W1) @ W2
Log-similarities:        z_i = cos(x*, e_i) / tau

All similarity math stays in the log domain: exp(cos/tau) overflows for the
encoder-scale temperatures (tau ~ 0.01) and every downstream formula is
algebraically invariant to the representation.  Gradients are computed
analytically, including the Jacobian of the L2 normalization inside cos.
All arithmetic is float64 with fixed reduction order, so results are
bit-reproducible for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateInputError, ShapeError
from .store import EmbeddingMatrix, load_embeddings, save_embeddings

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdapterConfig:
    hidden_ratio: int = 4          # h = max(1, d // hidden_ratio)
    lam: float = 0.2               # residual mixing ratio
    tau: float = 0.01              # softmax temperature on cosine
    lr: float = 1e-3
    weight_decay: float = 1e-2
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lambda must lie in [0,1]")
        if self.hidden_ratio < 1:
            raise ConfigError("hidden_ratio must be >= 1")


@dataclass
class AdapterParams:
    """Learnable maps W1 (d x h), W2 (h x d) plus AdamW moment state."""

    W1: np.ndarray
    W2: np.ndarray
    lam: float
    m_W1: np.ndarray = field(default=None, repr=False)
    v_W1: np.ndarray = field(default=None, repr=False)
    m_W2: np.ndarray = field(default=None, repr=False)
    v_W2: np.ndarray = field(default=None, repr=False)
    step: int = 0

    def __post_init__(self):
        if self.m_W1 is None:
            self.m_W1 = np.zeros_like(self.W1)
            self.v_W1 = np.zeros_like(self.W1)
            self.m_W2 = np.zeros_like(self.W2)
            self.v_W2 = np.zeros_like(self.W2)

    @property
    def dims(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]


def init_params(dims: int, cfg: AdapterConfig) -> AdapterParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, deterministic in seed."""
    h = max(1, dims // cfg.hidden_ratio)
    rng = np.random.default_rng(cfg.seed)
    b1 = 1.0 / math.sqrt(dims)
    b2 = 1.0 / math.sqrt(h)
    W1 = rng.uniform(-b1, b1, size=(dims, h))
    W2 = rng.uniform(-b2, b2, size=(h, dims))
    return AdapterParams(W1=W1, W2=W2, lam=cfg.lam)


def forward(x: np.ndarray, p: AdapterParams) -> np.ndarray:
    """x* = (1 - lam) x + lam relu(x W1) W2 for a batch of rows."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != p.dims:
        raise ShapeError(f"input dims {x.shape[1]} != adapter dims {p.dims}")
    hidden = np.maximum(x @ p.W1, 0.0)
    return (1.0 - p.lam) * x + p.lam * (hidden @ p.W2)


def similarities(x_star: np.ndarray, text: EmbeddingMatrix, tau: float) -> np.ndarray:
    """z_i = cos(x*, e_i) / tau, both sides L2-normalized. Batched."""
    if tau <= 0:
        raise ConfigError("tau must be > 0")
    x = np.atleast_2d(np.asarray(x_star, dtype=np.float64))
    if x.shape[1] != text.dims:
        raise ShapeError(f"feature dims {x.shape[1]} != text dims {text.dims}")
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if (norms < 1e-12).any():
        raise DegenerateInputError("zero-norm adapted feature")
    e = text.as_f64()
    e = e / np.linalg.norm(e, axis=1, keepdims=True)
    z = (x / norms) @ e.T / tau
    return z if np.asarray(x_star).ndim == 2 else z[0]


def probabilities(z: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=-1, keepdims=True)


def log_probabilities(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def ce_loss(z: np.ndarray, label: int) -> float:
    """Cross-entropy -log p_label, computed from logits in the log domain."""
    return float(-log_probabilities(z)[..., label])


def backward(
    x: np.ndarray,
    text: EmbeddingMatrix,
    p: AdapterParams,
    per_sample_logit_grads: np.ndarray,
    tau: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the mean batch loss w.r.t. W1 and W2.

    `per_sample_logit_grads[m, i]` is dL_m/dz_i for sample m; the chain runs
    through cos (with the normalization Jacobian of x*), the residual sum,
    and the two linear layers.  Weight vectors from the objective are
    treated as constants (stop-gradient).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    G = np.atleast_2d(np.asarray(per_sample_logit_grads, dtype=np.float64))
    if G.shape[0] != x.shape[0]:
        raise ShapeError("batch size mismatch between inputs and logit grads")
    if G.shape[1] != text.rows:
        raise ShapeError("logit grad width must equal class count")
    m_batch = x.shape[0]

    pre = x @ p.W1
    hidden = np.maximum(pre, 0.0)
    x_star = (1.0 - p.lam) * x + p.lam * (hidden @ p.W2)

    e = text.as_f64()
    e = e / np.linalg.norm(e, axis=1, keepdims=True)
    norms = np.linalg.norm(x_star, axis=1, keepdims=True)
    if (norms < 1e-12).any():
        raise DegenerateInputError("zero-norm adapted feature in backward")
    x_hat = x_star / norms

    # dL/d x_hat, then through the normalization Jacobian (I - x_hat x_hat^T)/|x*|
    g_hat = (G @ e) / tau
    radial = (g_hat * x_hat).sum(axis=1, keepdims=True)
    d_xstar = (g_hat - radial * x_hat) / norms

    d_xstar /= m_batch  # mean over the batch
    dW2 = p.lam * (hidden.T @ d_xstar)
    d_hidden = p.lam * (d_xstar @ p.W2.T)
    d_pre = d_hidden * (pre > 0.0)
    dW1 = x.T @ d_pre
    return dW1, dW2


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def optimizer_step(
    p: AdapterParams,
    grads: tuple[np.ndarray, np.ndarray],
    step: int,
    total_steps: int,
    cfg: AdapterConfig,
) -> None:
    """One AdamW update (decoupled decay) at the cosine-scheduled rate."""
    if step >= total_steps:
        raise ConfigError("step must be < total_steps")
    lr = cosine_lr(cfg.lr, step, total_steps)
    p.step += 1
    t = p.step
    for name, g in zip(("W1", "W2"), grads):
        w = getattr(p, name)
        m = getattr(p, "m_" + name)
        v = getattr(p, "v_" + name)
        m[:] = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v[:] = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        w -= lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + cfg.weight_decay * w)


def save_params(p: AdapterParams, out_dir) -> None:
    """W1/W2 as CROFEMB1 files (both stored h x d) plus a plain-text header."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_embeddings(EmbeddingMatrix(p.W1.T.astype(np.float32)), out / "w1_t.emb")
    save_embeddings(EmbeddingMatrix(p.W2.astype(np.float32)), out / "w2.emb")
    (out / "adapter.txt").write_text(
        f"lambda = {p.lam!r}\nhidden = {p.hidden}\nstep = {p.step}\n", encoding="utf-8"
    )


def load_params(in_dir) -> AdapterParams:
    path = Path(in_dir)
    w1_t = load_embeddings(path / "w1_t.emb").as_f64()
    w2 = load_embeddings(path / "w2.emb").as_f64()
    header = {}
    for line in (path / "adapter.txt").read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            header[key.strip()] = value.strip()
    p = AdapterParams(W1=w1_t.T.copy(), W2=w2, lam=float(header["lambda"]))
    p.step = int(header["step"])
    return p
