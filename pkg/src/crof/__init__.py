"""CRoF: robust few-shot classification under noisy labels.

A residual adapter is fine-tuned over fixed image embeddings against class
text embeddings; the training signal smooths each (possibly noisy) label over
the top-K most similar classes with rank-dependent weights.
"""

from .adapter import (
    AdapterConfig,
    AdapterParams,
    backward,
    ce_loss,
    forward,
    init_params,
    load_params,
    optimizer_step,
    probabilities,
    save_params,
    similarities,
)
from .errors import (
    ConfigError,
    CrofError,
    DegenerateInputError,
    FormatError,
    ShapeError,
    StorageError,
)
from .fusion import build_prompt_request, fuse, interclass_similarity, mean_offdiagonal
from .objective import SampleObjective, logit_gradient, plain_ce, weighted_loss
from .store import (
    EmbeddingMatrix,
    FewShotDataset,
    NoiseSpec,
    generate_synthetic,
    inject_noise,
    load_embeddings,
    save_embeddings,
)
from .trainer import Metrics, TrainConfig, evaluate, sweep, train
from .weighting import (
    RankedSimilarities,
    WeightVector,
    compute_weights,
    max_trusted_rank,
    normalize_weights,
    rank_original,
    weights_for_sample,
)

__version__ = "0.1.0"
