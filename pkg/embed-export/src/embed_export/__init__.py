"""Transformer [CLS] embedding exporter for the ood-embed/1 format."""

from .exporter import CorpusFormatError, CorpusRow, ExportJob, ModelLoadError, export_embeddings, read_corpus

__version__ = "0.1.0"

__all__ = [
    "CorpusFormatError",
    "CorpusRow",
    "ExportJob",
    "ModelLoadError",
    "export_embeddings",
    "read_corpus",
]
