"""clip_export: encode prompts and images with a public contrastive
vision-language encoder and write CROFEMB1 embedding files.

The bridge is one-directional: it only writes files in the engine's
format and never imports the classification engine or is imported by it.
"""

from .exporter import (
    DEFAULT_MODEL,
    ClipEncoder,
    Encoder,
    EncoderUnavailableError,
    ExportJob,
    export_image_embeddings,
    export_text_embeddings,
    load_encoder,
)
from .format import ExportError, write_crofemb

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "ClipEncoder",
    "Encoder",
    "EncoderUnavailableError",
    "ExportError",
    "ExportJob",
    "export_image_embeddings",
    "export_text_embeddings",
    "load_encoder",
    "write_crofemb",
    "__version__",
]
