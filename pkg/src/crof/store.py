"""Embedding/label persistence, synthetic data generation, and noise injection.

The on-disk embedding format (CROFEMB1) is a fixed little-endian layout:

    bytes 0-7    ASCII magic ``CROFEMB1``
    bytes 8-11   uint32 LE row count
    bytes 12-15  uint32 LE dim count
    byte  16     flags (bit 0 = rows are unit L2 norm)
    bytes 17-    row-major IEEE-754 float32 LE payload

Label files are plain text, one decimal class index per line; class-name
files are one UTF-8 name per line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateInputError, FormatError, ShapeError, StorageError

MAGIC = b"CROFEMB1"
_HEADER = struct.Struct("<8sIIB")

FLAG_NORMALIZED = 0x01

NORM_TOL = 1e-6


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Immutable rows x dims matrix of float32 feature vectors."""

    data: np.ndarray  # (rows, dims) float32, C-contiguous
    normalized: bool = False

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ShapeError(f"embedding matrix must be 2-D, got shape {arr.shape}")
        rows, dims = arr.shape
        if rows < 1:
            raise ShapeError("embedding matrix needs at least 1 row")
        if dims < 2:
            raise ShapeError("embedding matrix needs at least 2 dims")
        if not np.isfinite(arr).all():
            raise DegenerateInputError("embedding matrix contains NaN or Inf")
        if self.normalized:
            norms = np.linalg.norm(arr.astype(np.float64), axis=1)
            if np.abs(norms - 1.0).max() > NORM_TOL:
                raise DegenerateInputError(
                    "matrix flagged normalized but row norms deviate from 1"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    def as_f64(self) -> np.ndarray:
        return self.data.astype(np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return (
            self.normalized == other.normalized
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True)
class FewShotDataset:
    """Image embeddings with clean/noisy labels and a train/test split.

    Row indices in ``train_idx`` form the few-shot train split (exactly
    ``shots`` rows per class); ``test_idx`` is the held-out evaluation split.
    """

    images: EmbeddingMatrix
    clean_labels: np.ndarray  # (rows,) int64
    noisy_labels: np.ndarray  # (rows,) int64
    n_classes: int
    shots: int
    class_names: tuple[str, ...]
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        for name in ("clean_labels", "noisy_labels", "train_idx", "test_idx"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        rows = self.images.rows
        if len(self.clean_labels) != rows or len(self.noisy_labels) != rows:
            raise ShapeError("label arrays must match image row count")
        for labels in (self.clean_labels, self.noisy_labels):
            if labels.min() < 0 or labels.max() >= self.n_classes:
                raise ConfigError("class index out of range")
        if len(self.class_names) != self.n_classes:
            raise ConfigError("class_names length must equal n_classes")
        counts = np.bincount(self.clean_labels[self.train_idx], minlength=self.n_classes)
        if not (counts == self.shots).all():
            raise ConfigError("train split must hold exactly `shots` samples per class")

    def with_noisy_labels(self, noisy: np.ndarray) -> "FewShotDataset":
        return replace(self, noisy_labels=np.asarray(noisy, dtype=np.int64))


@dataclass(frozen=True)
class NoiseSpec:
    """Label corruption recipe: kind, ratio delta, RNG seed."""

    kind: str  # "symmetric" | "asymmetric"
    delta: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("symmetric", "asymmetric"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError(f"noise ratio must lie in [0,1], got {self.delta}")


def save_embeddings(m: EmbeddingMatrix, path) -> None:
    """Write `m` to `path` in the CROFEMB1 format (round-trips bit-exactly)."""
    flags = FLAG_NORMALIZED if m.normalized else 0
    header = _HEADER.pack(MAGIC, m.rows, m.dims, flags)
    payload = np.ascontiguousarray(m.data, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise StorageError(f"cannot write embeddings to {path}: {exc}") from exc


def load_embeddings(path) -> EmbeddingMatrix:
    """Read a CROFEMB1 file; all matrix invariants re-checked on load."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise StorageError(f"cannot read embeddings from {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, rows, dims, flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * rows * dims
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload length mismatch (declared {rows}x{dims}, "
            f"expected {expected} bytes, got {len(raw)})"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, dims)
    return EmbeddingMatrix(data=data.copy(), normalized=bool(flags & FLAG_NORMALIZED))


def save_labels(labels: np.ndarray, path) -> None:
    try:
        Path(path).write_text("".join(f"{int(v)}\n" for v in labels), encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write labels to {path}: {exc}") from exc


def load_labels(path) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read labels from {path}: {exc}") from exc
    try:
        return np.array([int(line) for line in text.splitlines() if line.strip()], dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer label line") from exc


def save_class_names(names, path) -> None:
    Path(path).write_text("".join(f"{n}\n" for n in names), encoding="utf-8")


def load_class_names(path) -> tuple[str, ...]:
    return tuple(Path(path).read_text(encoding="utf-8").splitlines())


def _normalize_rows(a: np.ndarray) -> np.ndarray:
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def generate_synthetic(
    n_classes: int,
    dims: int,
    shots: int,
    test_per_class: int,
    sigma: float,
    seed: int,
) -> tuple[FewShotDataset, EmbeddingMatrix]:
    """Build a desk-scale stand-in for encoder features.

    Class prototypes are i.i.d. standard-normal vectors, L2-normalized; each
    image embedding is normalize(prototype + sigma * standard-normal).  The
    prototype matrix doubles as the text-embedding matrix, so the zero-shot
    nearest-prototype oracle stays analytically tractable.  Deterministic
    given `seed`.
    """
    if n_classes < 2:
        raise ConfigError("need at least 2 classes")
    if dims < 2:
        raise ConfigError("need at least 2 dims")
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    protos = _normalize_rows(rng.standard_normal((n_classes, dims)))

    per_class = shots + test_per_class
    labels = np.repeat(np.arange(n_classes), per_class)
    noise = rng.standard_normal((n_classes * per_class, dims))
    images = _normalize_rows(protos[labels] + sigma * noise)

    block = np.arange(per_class)
    train_idx = np.concatenate([c * per_class + block[:shots] for c in range(n_classes)])
    test_idx = np.concatenate([c * per_class + block[shots:] for c in range(n_classes)])

    ds = FewShotDataset(
        images=EmbeddingMatrix(images.astype(np.float32), normalized=True),
        clean_labels=labels,
        noisy_labels=labels.copy(),
        n_classes=n_classes,
        shots=shots,
        class_names=tuple(f"class_{c:03d}" for c in range(n_classes)),
        train_idx=train_idx,
        test_idx=test_idx,
    )
    prototypes = EmbeddingMatrix(protos.astype(np.float32), normalized=True)
    return ds, prototypes


def inject_noise(ds: FewShotDataset, spec: NoiseSpec) -> FewShotDataset:
    """Corrupt train labels at per-class count floor(delta*shots + 0.5).

    symmetric: replacement uniform over the other n-1 classes;
    asymmetric: replacement is the fixed cyclic map (c+1) mod n.
    The test split is never altered.  Deterministic given spec.seed.
    """
    train = ds.train_idx
    if not np.array_equal(ds.noisy_labels[train], ds.clean_labels[train]):
        raise ConfigError("noise must be injected exactly once (train labels already noisy)")
    n = ds.n_classes
    k_per_class = int(np.floor(spec.delta * ds.shots + 0.5))
    rng = np.random.default_rng(spec.seed)
    noisy = ds.noisy_labels.copy()
    for c in range(n):
        members = train[ds.clean_labels[train] == c]
        chosen = rng.choice(members, size=k_per_class, replace=False)
        if spec.kind == "symmetric":
            # uniform over the n-1 other classes, never the clean class itself
            draws = rng.integers(0, n - 1, size=k_per_class)
            draws[draws >= c] += 1
            noisy[chosen] = draws
        else:
            noisy[chosen] = (c + 1) % n
    return ds.with_noisy_labels(noisy)
