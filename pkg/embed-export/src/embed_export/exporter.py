"""Extract penultimate [CLS]-position embeddings and write ood-embed/1 files.

The embedding site is the final hidden state at the [CLS] position, before
any pooler nonlinearity.  The exporter runs the frozen pretrained weights in
eval mode (no fine-tuning), so rows with identical text always map to
identical vectors.  Floats are written with 9 significant digits, matching
the single-precision source; consumers read them as doubles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class ModelLoadError(Exception):
    pass


class CorpusFormatError(Exception):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


SPLITS = ("train", "val", "test")

# encoder presets; any Hugging Face identifier or local model directory works
MODEL_PRESETS = {
    "bert-base": "bert-base-uncased",
    "bert-large": "bert-large-uncased",
    "roberta-base": "roberta-base",
    "roberta-large": "roberta-large",
}


@dataclass
class ExportJob:
    model: str
    corpus_path: str
    output_path: str
    batch_size: int = 16
    max_length: int = 128


@dataclass
class CorpusRow:
    id: str
    label: int | None
    split: str
    text: str


def read_corpus(path) -> list[CorpusRow]:
    """Parse a TSV corpus: id, label-or-null, split, text (one row per line).

    Labels must be dense 0..C-1 over the labeled rows; null labels are only
    allowed on the test split.
    """
    rows: list[CorpusRow] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise CorpusFormatError(f"expected 4 tab-separated fields, got {len(parts)}", line=line_no)
            row_id, label_text, split, text = parts
            if split not in SPLITS:
                raise CorpusFormatError(f"bad split {split!r}", line=line_no)
            if label_text.lower() in ("", "null", "none"):
                if split != "test":
                    raise CorpusFormatError("null label is only permitted on the test split", line=line_no)
                label = None
            else:
                try:
                    label = int(label_text)
                except ValueError:
                    raise CorpusFormatError(f"bad label {label_text!r}", line=line_no)
                if label < 0:
                    raise CorpusFormatError(f"label {label} is negative", line=line_no)
            rows.append(CorpusRow(id=row_id, label=label, split=split, text=text))
    if not rows:
        raise CorpusFormatError("corpus is empty", line=1)
    labels = sorted({row.label for row in rows if row.label is not None})
    if labels and labels != list(range(labels[-1] + 1)):
        raise CorpusFormatError(f"labels must be dense 0..C-1, got {labels}")
    return rows


def _load_model(identifier: str):
    import torch
    from transformers import AutoModel, AutoTokenizer

    name = MODEL_PRESETS.get(identifier, identifier)
    try:
        tokenizer = AutoTokenizer.from_pretrained(name)
        model = AutoModel.from_pretrained(name)
    except Exception as exc:
        raise ModelLoadError(f"could not load model {name!r}: {exc}")
    model.eval()
    torch.set_grad_enabled(False)
    return tokenizer, model


def _format_vector(values) -> str:
    return "[" + ",".join(format(float(v), ".9g") for v in values) + "]"


def export_embeddings(job: ExportJob) -> int:
    """Run the corpus through the model and write the embedding file.

    Returns the number of data rows written.  Row order follows the corpus;
    the header carries the model hidden size as ``dim``.
    """
    import torch

    rows = read_corpus(job.corpus_path)
    tokenizer, model = _load_model(job.model)
    max_length = job.max_length
    declared = getattr(tokenizer, "model_max_length", None)
    if declared and declared < 10**6:  # huge sentinel means "unset"
        max_length = min(max_length, int(declared))
    hidden_size = int(model.config.hidden_size)
    labels = [row.label for row in rows if row.label is not None]
    num_classes = (max(labels) + 1) if labels else 0

    out_path = Path(job.output_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with open(out_path, "w", encoding="utf-8") as handle:
        header = {"format": "ood-embed/1", "dim": hidden_size, "num_classes": num_classes, "name": Path(job.corpus_path).stem}
        handle.write(json.dumps(header) + "\n")
        for start in range(0, len(rows), job.batch_size):
            batch = rows[start : start + job.batch_size]
            # fixed-length padding keeps identical texts bit-identical
            # regardless of batch composition
            encoded = tokenizer(
                [row.text for row in batch],
                return_tensors="pt",
                padding="max_length",
                truncation=True,
                max_length=max_length,
            )
            with torch.no_grad():
                hidden = model(**encoded).last_hidden_state
            cls_embeddings = hidden[:, 0, :]
            for row, vector in zip(batch, cls_embeddings):
                prefix = json.dumps({"id": row.id, "label": row.label, "split": row.split})[:-1]
                handle.write(prefix + ', "vector": ' + _format_vector(vector.tolist()) + "}\n")
                written += 1
    return written
