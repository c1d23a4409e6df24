"""Top-K multiple-label weighting over the similarity ranking.

Given the descending similarity ranking of all classes and the rank r of the
original (possibly noisy) label, raw weights over the top-K candidates fall
into three scenarios:

  r = 1       one-hot on the original label (it agrees with the model).
  1 < r <= K  the original label keeps alpha * gamma^(r-2); of the remainder,
              the top-1 label gets a beta share and the other candidates
              split the rest proportionally to their similarity gap from
              top-1.
  r > K       the original label is discarded; top-1 gets beta, the other
              K-1 candidates split 1 - beta by the same gap rule.

Weights are then renormalized by similarity, w*_i = s*_i w_i / sum_j s*_j w_j.
Everything works on log-similarities z (s = exp(z)); gap ratios and the
normalization are evaluated with shifted exponentials so encoder-scale
logits (|z| ~ 100) never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

SUM_TOL = 1e-9


@dataclass(frozen=True)
class RankedSimilarities:
    """Descending class ranking with the original label's 1-based rank."""

    order: np.ndarray   # permutation of class indices, best first
    logits: np.ndarray  # z sorted to match `order` (non-increasing)
    r: int
    K: int

    @property
    def n(self) -> int:
        return len(self.order)

    def candidates(self) -> np.ndarray:
        return self.order[: self.K]


@dataclass(frozen=True)
class WeightVector:
    """Raw scenario weights w and similarity-normalized weights w*."""

    candidates: np.ndarray
    w: np.ndarray
    w_star: np.ndarray | None = None


def rank_original(z: np.ndarray, original: int, K: int) -> RankedSimilarities:
    """Stable descending sort of logits; ties resolve in the original's favor."""
    z = np.asarray(z, dtype=np.float64)
    n = len(z)
    if not 0 <= original < n:
        raise ShapeError(f"original label {original} out of range for {n} classes")
    K = min(K, n)
    if K < 1:
        raise ConfigError("K must be >= 1")
    # sort by descending logit; among equal logits the original label wins,
    # then ascending class index for determinism
    tie = np.ones(n, dtype=np.int64)
    tie[original] = 0
    order = np.lexsort((np.arange(n), tie, -z))
    r = int(np.flatnonzero(order == original)[0]) + 1
    return RankedSimilarities(order=order, logits=z[order], r=r, K=K)


def _gap_shares(logits: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Shares proportional to s*_1 - s*_i over `members` (sorted positions >= 1).

    Computed as (1 - exp(z_i - z_1)) / sum(1 - exp(z_j - z_1)); when every
    member ties with top-1 the ratio is 0/0 and the mass is split uniformly.
    """
    gaps = 1.0 - np.exp(logits[members] - logits[0])
    total = gaps.sum()
    if total <= 0.0:
        return np.full(len(members), 1.0 / len(members))
    return gaps / total


def compute_weights(
    rs: RankedSimilarities, alpha: float, beta: float, gamma: float
) -> WeightVector:
    """Raw weights w over the top-K candidates for the three rank scenarios."""
    for name, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if not 0.0 < v < 1.0:
            raise ConfigError(f"{name} must lie in (0,1), got {v}")
    K, r = rs.K, rs.r
    w = np.zeros(K)

    if r == 1:
        w[0] = 1.0
    elif r <= K:
        kept = alpha * gamma ** (r - 2)
        w[r - 1] = kept
        others = np.array([i for i in range(1, K) if i != r - 1], dtype=np.int64)
        if others.size == 0:
            # nobody left to receive the beta split; the top-1 label takes
            # the whole remainder so the weights stay on the simplex
            w[0] = 1.0 - kept
        else:
            w[0] = (1.0 - kept) * beta
            w[others] = (1.0 - kept) * (1.0 - beta) * _gap_shares(rs.logits, others)
    else:
        others = np.arange(1, K)
        if others.size == 0:
            w[0] = 1.0
        else:
            w[0] = beta
            w[others] = (1.0 - beta) * _gap_shares(rs.logits, others)

    return WeightVector(candidates=rs.candidates().copy(), w=w)


def normalize_weights(wv: WeightVector, rs: RankedSimilarities) -> WeightVector:
    """Similarity renormalization w*_i = s*_i w_i / sum_j s*_j w_j.

    Evaluated as a softmax over z_i + ln(w_i) restricted to the support of w,
    so it is exact for one-hot w and safe for large logits.
    """
    w = wv.w
    support = w > 0.0
    t = np.full(len(w), -np.inf)
    t[support] = rs.logits[: rs.K][support] + np.log(w[support])
    shifted = np.exp(t - t.max())
    w_star = shifted / shifted.sum()
    return WeightVector(candidates=wv.candidates, w=w, w_star=w_star)


def weights_for_sample(
    z: np.ndarray, original: int, K: int, alpha: float, beta: float, gamma: float
) -> WeightVector:
    """rank -> raw weights -> similarity-normalized weights, in one call."""
    rs = rank_original(z, original, K)
    return normalize_weights(compute_weights(rs, alpha, beta, gamma), rs)


def max_trusted_rank(alpha: float, beta: float, gamma: float) -> int:
    """Largest rank r at which the original label still outweighs top-1.

    In the 1 < r <= K scenario, w_r > w_1 iff r < 2 + ln(beta/(alpha(1+beta)))
    / ln(gamma).  Returns 1 when even rank 2 fails the inequality (i.e.
    beta/(alpha(1+beta)) >= 1): the original label is only dominant when it
    already ranks first.
    """
    for name, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if not 0.0 < v < 1.0:
            raise ConfigError(f"{name} must lie in (0,1), got {v}")
    arg = beta / (alpha * (1.0 + beta))
    if arg >= 1.0:
        return 1
    bound = 2.0 + math.log(arg) / math.log(gamma)
    return math.ceil(bound) - 1  # largest integer strictly below `bound`
