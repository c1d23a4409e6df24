"""Class-text embedding fusion, inter-class similarity diagnostics, and the
description-request template.

Fusion adds the supplement-description embedding to the baseline description
embedding per class and renormalizes, which widens inter-class distances
without discarding the baseline prompt information.  The LLM call itself is
out of process: we only emit the request text; the generated descriptions are
encoded externally and ingested as CROFEMB1 files.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DegenerateInputError, ShapeError
from .store import EmbeddingMatrix

_REQUEST_TEMPLATE = (
    "I have {n} categories of {target}, and each category is described as "
    '"a photo of {{category name}}." I want to introduce detailed '
    "differentiation descriptions, comparative information, scene "
    "backgrounds, emotions, or domain-specific terms in the descriptions to "
    "guide CLIP text encoder to generate more distinguishable category "
    "embedding for similar categories. Please generate five descriptions "
    "for each category according to above principles. "
    "My category list is: [{classes}]. "
    "Output the descriptions in JSON format."
)


def fuse(sup: EmbeddingMatrix, cafo: EmbeddingMatrix) -> EmbeddingMatrix:
    """Row-wise normalize(sup_i + cafo_i)."""
    if sup.data.shape != cafo.data.shape:
        raise ShapeError(
            f"shape mismatch: sup {sup.data.shape} vs cafo {cafo.data.shape}"
        )
    summed = sup.as_f64() + cafo.as_f64()
    norms = np.linalg.norm(summed, axis=1)
    bad = np.flatnonzero(norms < 1e-12)
    if bad.size:
        raise DegenerateInputError(
            f"degenerate fusion: sup and cafo cancel at row {bad[0]}"
        )
    return EmbeddingMatrix((summed / norms[:, None]).astype(np.float32), normalized=True)


def average_descriptions(per_class: list[EmbeddingMatrix]) -> EmbeddingMatrix:
    """Collapse multiple description embeddings per class to one unit row each.

    Rows of element i are averaged then L2-normalized (prompt ensembling);
    used when each class ships several generated descriptions.
    """
    means = []
    for i, m in enumerate(per_class):
        mean = m.as_f64().mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm < 1e-12:
            raise DegenerateInputError(f"descriptions for class {i} average to zero")
        means.append(mean / norm)
    return EmbeddingMatrix(np.stack(means).astype(np.float32), normalized=True)


def interclass_similarity(e: EmbeddingMatrix) -> np.ndarray:
    """Cosine similarity matrix between class rows (expects unit rows)."""
    x = e.as_f64()
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    sim = x @ x.T
    return (sim + sim.T) / 2.0  # enforce exact symmetry


def mean_offdiagonal(sim: np.ndarray) -> float:
    """Arithmetic mean over the i != j entries of a square similarity matrix."""
    n = sim.shape[0]
    if sim.ndim != 2 or sim.shape[1] != n:
        raise ShapeError(f"similarity matrix must be square, got {sim.shape}")
    if n < 2:
        raise ShapeError("need at least 2 classes for an off-diagonal mean")
    return float((sim.sum() - np.trace(sim)) / (n * (n - 1)))


def build_prompt_request(task_target: str, class_names) -> str:
    """Fill the description-request template with n, target, and class list."""
    names = list(class_names)
    if not names:
        raise ConfigError("class list must be non-empty")
    return _REQUEST_TEMPLATE.format(
        n=len(names), target=task_target, classes=", ".join(names)
    )
