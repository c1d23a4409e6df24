"""Encode prompts or images with a pretrained contrastive encoder and
write the result as CROFEMB1 files.

The encoder is pluggable: anything exposing ``encode_text(prompts)`` and
``encode_images(paths)`` returning a rows x dims array works.  The default
backend wraps a public CLIP checkpoint via ``transformers``; when that
model (or torch) is unavailable in the environment, ``load_encoder``
raises :class:`EncoderUnavailableError` instead of writing anything.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .format import write_crofemb

DEFAULT_MODEL = "openai/clip-vit-base-patch32"


class EncoderUnavailableError(RuntimeError):
    """The pretrained encoder (or its framework) cannot be loaded here."""


class Encoder(Protocol):
    def encode_text(self, prompts: Sequence[str]) -> np.ndarray: ...

    def encode_images(self, paths: Sequence[Path]) -> np.ndarray: ...


@dataclass(frozen=True)
class ExportJob:
    """One export request: encode ``inputs`` and write them to ``out``."""

    model: str
    inputs: tuple[str, ...]
    out: Path
    normalize: bool = True

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("export job needs at least one input")


@dataclass
class ClipEncoder:
    """Backend wrapping a CLIP checkpoint through transformers/torch."""

    model_name: str = DEFAULT_MODEL
    batch_size: int = 32
    _model: object = field(default=None, repr=False)
    _processor: object = field(default=None, repr=False)

    @classmethod
    def load(cls, model_name: str = DEFAULT_MODEL, batch_size: int = 32) -> "ClipEncoder":
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise EncoderUnavailableError(f"encoder framework missing: {exc}") from exc
        try:
            model = CLIPModel.from_pretrained(model_name)
            processor = CLIPProcessor.from_pretrained(model_name)
        except Exception as exc:  # hub errors vary by transformers version
            raise EncoderUnavailableError(
                f"pretrained model {model_name!r} unavailable: {exc}"
            ) from exc
        model.eval()
        return cls(model_name, batch_size, model, processor)

    def _batches(self, items):
        for i in range(0, len(items), self.batch_size):
            yield items[i : i + self.batch_size]

    def encode_text(self, prompts: Sequence[str]) -> np.ndarray:
        import torch

        chunks = []
        with torch.no_grad():
            for batch in self._batches(list(prompts)):
                tokens = self._processor(text=batch, return_tensors="pt", padding=True)
                chunks.append(self._model.get_text_features(**tokens).cpu().numpy())
        return np.concatenate(chunks, axis=0)

    def encode_images(self, paths: Sequence[Path]) -> np.ndarray:
        import torch
        from PIL import Image

        chunks = []
        with torch.no_grad():
            for batch in self._batches([Path(p) for p in paths]):
                images = [Image.open(p).convert("RGB") for p in batch]
                pixels = self._processor(images=images, return_tensors="pt")
                chunks.append(self._model.get_image_features(**pixels).cpu().numpy())
        return np.concatenate(chunks, axis=0)


def load_encoder(model_name: str = DEFAULT_MODEL, batch_size: int = 32) -> Encoder:
    return ClipEncoder.load(model_name, batch_size)


def _checked(vectors: np.ndarray, n_inputs: int, what: str) -> np.ndarray:
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or vectors.shape[0] != n_inputs:
        raise EncoderUnavailableError(
            f"encoder returned {vectors.shape} for {n_inputs} {what}"
        )
    return vectors


def export_text_embeddings(
    prompts: Sequence[str],
    out: Path | str,
    *,
    encoder: Encoder | None = None,
    model: str = DEFAULT_MODEL,
    normalize: bool = True,
) -> Path:
    """Encode ``prompts`` (order preserved) and write a CROFEMB1 file."""
    job = ExportJob(model, tuple(prompts), Path(out), normalize)
    enc = encoder if encoder is not None else load_encoder(job.model)
    vectors = _checked(enc.encode_text(list(job.inputs)), len(job.inputs), "prompts")
    return write_crofemb(vectors, job.out, normalize=job.normalize)


def export_image_embeddings(
    paths: Sequence[Path | str],
    out: Path | str,
    *,
    encoder: Encoder | None = None,
    model: str = DEFAULT_MODEL,
    normalize: bool = True,
) -> Path:
    """Encode image files (order preserved) and write a CROFEMB1 file."""
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(f"image file not found: {p}")
    job = ExportJob(model, tuple(str(p) for p in paths), Path(out), normalize)
    enc = encoder if encoder is not None else load_encoder(job.model)
    vectors = _checked(enc.encode_images(list(job.inputs)), len(job.inputs), "images")
    return write_crofemb(vectors, job.out, normalize=job.normalize)
