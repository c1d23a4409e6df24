"""Weighted multi-label loss over top-K candidates and its logit gradient.

Per sample the loss is sum_k w*_k * base_loss(p, candidate_k); the shipped
base loss is cross-entropy, giving L = -sum_k w*_k log p_{c_k} and the
closed-form gradient dL/dz = p - sum_k w*_k onehot(c_k).  Candidate weights
are constants here (stop-gradient); batch reduction is the arithmetic mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adapter import log_probabilities, probabilities
from .errors import ShapeError


@dataclass(frozen=True)
class SampleObjective:
    """Logits plus the candidate set and normalized weights for one sample."""

    z: np.ndarray           # (n,) logits
    candidates: np.ndarray  # (K,) class indices
    w_star: np.ndarray      # (K,) normalized weights, sum 1

    def __post_init__(self):
        if len(self.candidates) != len(self.w_star):
            raise ShapeError("candidates and w_star must have equal length")


def weighted_loss(so: SampleObjective) -> float:
    """sum_k w*_k * (-log p_{candidate_k}), evaluated in the log domain."""
    log_p = log_probabilities(so.z)
    return float(-(so.w_star * log_p[so.candidates]).sum())


def logit_gradient(so: SampleObjective) -> np.ndarray:
    """dL/dz = p - sum_k w*_k onehot(candidate_k); components sum to 0."""
    grad = probabilities(so.z).copy()
    np.subtract.at(grad, so.candidates, so.w_star)
    return grad


def plain_ce(z: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Standard cross-entropy on one hard label, with gradient p - onehot.

    Bitwise identical to the weighted path with a one-hot weight vector on
    `label` (w* = 1.0 multiplies and subtracts exactly).
    """
    log_p = log_probabilities(z)
    loss = float(-log_p[label])
    grad = probabilities(z).copy()
    grad[label] -= 1.0
    return loss, grad
