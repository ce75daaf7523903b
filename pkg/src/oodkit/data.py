"""Datasets: synthetic clusters, hashed text features, embedding files, batching.

The embedding interchange format ("ood-embed/1") is UTF-8 JSON-lines.  Line 1
is a header object ``{"format": "ood-embed/1", "dim": int, "num_classes": int,
"name": str}``; every following line is one example ``{"id": str, "label":
int|null, "split": "train"|"val"|"test", "vector": [float, ...]}``.  A null
label is permitted only on the test split.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BatchTooSmall,
    DimensionMismatch,
    InvalidConfig,
    LabelOutOfRange,
    ParseError,
    TooFewClasses,
    UnknownClass,
)
from .rng import SplitMix64, derive_seed, stable_token_hash

EMBED_FORMAT = "ood-embed/1"
SPLITS = ("train", "val", "test")


@dataclass
class Example:
    """One classified (or unlabeled OOD) instance."""

    id: str
    label: int | None
    split: str
    vector: np.ndarray | None = None
    text: str | None = None


@dataclass
class Dataset:
    """An immutable collection of examples with shared dimensionality.

    Treated as read-only after construction; mutating examples in place is
    not supported anywhere in the toolkit.
    """

    examples: list[Example] = field(default_factory=list)
    num_classes: int = 0
    dim: int = 0
    name: str = ""

    def split_examples(self, split: str) -> list[Example]:
        return [ex for ex in self.examples if ex.split == split]

    @property
    def train(self) -> list[Example]:
        return self.split_examples("train")

    @property
    def val(self) -> list[Example]:
        return self.split_examples("val")

    @property
    def test(self) -> list[Example]:
        return self.split_examples("test")


@dataclass
class SynthConfig:
    """Isotropic Gaussian cluster generator settings."""

    num_classes: int = 4
    dim: int = 8
    per_class: int = 50
    std: float = 1.0
    separation: float = 6.0
    displacement: float = 12.0
    seed: int = 0

    def validate(self) -> None:
        if self.num_classes < 1 or self.per_class < 1 or self.dim < 1:
            raise InvalidConfig("num_classes, per_class and dim must all be >= 1")
        if self.std <= 0 or self.separation <= 0 or self.displacement <= 0:
            raise InvalidConfig("std, separation and displacement must be positive")
        if self.dim < self.num_classes:
            raise InvalidConfig(f"dim ({self.dim}) must be >= num_classes ({self.num_classes}) for the axis-aligned cluster layout")


def _split_counts(n: int) -> tuple[int, int, int]:
    # 80/10/10 with floor on the small splits; remainder goes to train.
    n_val = n // 10
    n_test = n // 10
    return n - n_val - n_test, n_val, n_test


def gen_synthetic(cfg: SynthConfig) -> tuple[Dataset, list[Example]]:
    """Generate ID clusters plus a displaced OOD cluster.

    ID class j is an isotropic Gaussian at ``separation * e_j``; each class is
    split 80/10/10 into train/val/test.  The OOD cluster sits at distance
    greater than ``displacement`` from every ID mean and is emitted as
    unlabeled test examples.
    """
    cfg.validate()
    rng = SplitMix64(derive_seed(cfg.seed, "synth"))
    examples: list[Example] = []
    for class_id in range(cfg.num_classes):
        mean = np.zeros(cfg.dim)
        mean[class_id] = cfg.separation
        n_train, n_val, n_test = _split_counts(cfg.per_class)
        for idx in range(cfg.per_class):
            vector = mean + cfg.std * np.array([rng.normal() for _ in range(cfg.dim)])
            if idx < n_train:
                split = "train"
            elif idx < n_train + n_val:
                split = "val"
            else:
                split = "test"
            examples.append(Example(id=f"syn-{class_id}-{idx:04d}", label=class_id, split=split, vector=vector))

    ood_mean = np.zeros(cfg.dim)
    ood_mean[: cfg.num_classes] = -cfg.displacement / math.sqrt(cfg.num_classes)
    ood: list[Example] = []
    for idx in range(cfg.per_class):
        vector = ood_mean + cfg.std * np.array([rng.normal() for _ in range(cfg.dim)])
        ood.append(Example(id=f"ood-{idx:04d}", label=None, split="test", vector=vector))

    dataset = Dataset(examples=examples, num_classes=cfg.num_classes, dim=cfg.dim, name=f"synth-c{cfg.num_classes}")
    return dataset, ood


def featurize_hashed_ngrams(text: str, dim: int, seed: int) -> np.ndarray:
    """Hash word unigrams and within-word character trigrams into ``dim`` buckets.

    Signed (+/-1) feature hashing followed by L2 normalization.  Text with no
    tokens (empty or whitespace-only), or whose buckets cancel exactly, maps
    to the first basis vector so the output always has unit norm.
    """
    if dim < 16:
        raise InvalidConfig("featurizer dim must be >= 16")
    counts: dict[str, int] = {}
    for word in text.split():
        counts[f"w:{word}"] = counts.get(f"w:{word}", 0) + 1
        for i in range(len(word) - 2):
            gram = word[i : i + 3]
            counts[f"c:{gram}"] = counts.get(f"c:{gram}", 0) + 1

    vector = np.zeros(dim)
    for token, count in counts.items():
        digest = stable_token_hash(token, seed)
        sign = 1.0 if (digest >> 63) & 1 == 0 else -1.0
        vector[digest % dim] += sign * count
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        basis = np.zeros(dim)
        basis[0] = 1.0
        return basis
    return vector / norm


def save_embeddings(dataset: Dataset, path) -> None:
    """Write a dataset in the ood-embed/1 JSON-lines format."""
    with open(path, "w", encoding="utf-8") as handle:
        header = {"format": EMBED_FORMAT, "dim": dataset.dim, "num_classes": dataset.num_classes, "name": dataset.name}
        handle.write(json.dumps(header) + "\n")
        for ex in dataset.examples:
            if ex.vector is None:
                raise InvalidConfig(f"example {ex.id} has no vector; featurize before saving")
            row = {"id": ex.id, "label": ex.label, "split": ex.split, "vector": [float(v) for v in ex.vector]}
            handle.write(json.dumps(row) + "\n")


def examples_as_dataset(examples: list[Example], dim: int, num_classes: int, name: str) -> Dataset:
    """Wrap a bare example list (e.g. an OOD pool) for saving."""
    return Dataset(examples=list(examples), num_classes=num_classes, dim=dim, name=name)


def load_embeddings(path) -> Dataset:
    """Load and validate an ood-embed/1 file.

    Inconsistent dimensions, out-of-range labels, and malformed rows raise
    with the offending 1-based line number.  Class coverage of the train
    split is only enforced when the file has train rows at all, so OOD-only
    files (all-test, null labels) load through the same path.
    """
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise ParseError("empty file; expected an ood-embed/1 header", line=1)

    header = _parse_json_line(lines[0], 1)
    if not isinstance(header, dict) or header.get("format") != EMBED_FORMAT:
        raise ParseError(f"unsupported format {header.get('format')!r}; expected {EMBED_FORMAT!r}" if isinstance(header, dict) else "header is not an object", line=1)
    try:
        dim = int(header["dim"])
        num_classes = int(header["num_classes"])
        name = str(header["name"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad header field: {exc}", line=1)

    examples: list[Example] = []
    for offset, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        row = _parse_json_line(text, offset)
        if not isinstance(row, dict):
            raise ParseError("row is not an object", line=offset)
        try:
            ex_id = str(row["id"])
            label = row["label"]
            split = row["split"]
            vector = row["vector"]
        except KeyError as exc:
            raise ParseError(f"missing field {exc}", line=offset)
        if split not in SPLITS:
            raise ParseError(f"bad split {split!r}", line=offset)
        if label is None:
            if split != "test":
                raise ParseError("null label is only permitted on the test split", line=offset)
        else:
            if not isinstance(label, int) or isinstance(label, bool):
                raise ParseError(f"label must be an integer or null, got {label!r}", line=offset)
            if label < 0 or label >= num_classes:
                raise LabelOutOfRange(f"label {label} outside 0..{num_classes - 1}", line=offset)
        if not isinstance(vector, list) or len(vector) != dim:
            raise DimensionMismatch(f"vector has {len(vector) if isinstance(vector, list) else 'no'} entries, header says {dim}", line=offset)
        values = np.asarray(vector, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ParseError("vector contains non-finite entries", line=offset)
        examples.append(Example(id=ex_id, label=label, split=split, vector=values))

    dataset = Dataset(examples=examples, num_classes=num_classes, dim=dim, name=name)
    train_labels = {ex.label for ex in dataset.train}
    if train_labels:
        missing = set(range(num_classes)) - train_labels
        if missing:
            raise ParseError(f"classes {sorted(missing)} missing from the train split")
    return dataset


def _parse_json_line(text: str, line: int):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=line)


def load_text_corpus(path, dim: int, seed: int, name: str | None = None) -> Dataset:
    """Read a TSV corpus (id, label-or-null, split, text) and featurize it."""
    examples: list[Example] = []
    max_label = -1
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", line=line_no)
            ex_id, label_text, split, text = parts
            if split not in SPLITS:
                raise ParseError(f"bad split {split!r}", line=line_no)
            if label_text.lower() in ("", "null", "none"):
                label = None
                if split != "test":
                    raise ParseError("null label is only permitted on the test split", line=line_no)
            else:
                try:
                    label = int(label_text)
                except ValueError:
                    raise ParseError(f"bad label {label_text!r}", line=line_no)
                if label < 0:
                    raise LabelOutOfRange(f"label {label} is negative", line=line_no)
                max_label = max(max_label, label)
            vector = featurize_hashed_ngrams(text, dim, seed)
            examples.append(Example(id=ex_id, label=label, split=split, vector=vector, text=text))
    dataset_name = name if name is not None else str(path)
    return Dataset(examples=examples, num_classes=max_label + 1, dim=dim, name=dataset_name)


def split_novel_class(dataset: Dataset, held_out: int) -> tuple[Dataset, list[Example]]:
    """Reserve one class as OOD and densely re-index the remaining labels."""
    if dataset.num_classes < 3:
        raise TooFewClasses(f"novel-class split needs >= 3 classes, got {dataset.num_classes}")
    if held_out < 0 or held_out >= dataset.num_classes:
        raise UnknownClass(f"class {held_out} outside 0..{dataset.num_classes - 1}")
    kept: list[Example] = []
    ood: list[Example] = []
    for ex in dataset.examples:
        if ex.label == held_out:
            ood.append(replace(ex, label=None, split="test"))
        elif ex.label is not None and ex.label > held_out:
            kept.append(replace(ex, label=ex.label - 1))
        else:
            kept.append(ex)
    id_ds = Dataset(examples=kept, num_classes=dataset.num_classes - 1, dim=dataset.dim, name=f"{dataset.name}-holdout{held_out}")
    return id_ds, ood


def batch_iter(dataset: Dataset, batch_size: int, epoch_seed: int):
    """Yield seeded-permutation batches over the train split, short tail kept."""
    if batch_size < 2:
        raise BatchTooSmall(f"batch size must be >= 2, got {batch_size}")
    train = dataset.train
    order = list(range(len(train)))
    SplitMix64(epoch_seed).shuffle(order)
    for start in range(0, len(order), batch_size):
        yield [train[i] for i in order[start : start + batch_size]]
