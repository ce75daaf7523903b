"""The four OOD scoring functions, their fitting procedures, and persistence.

Every score follows one convention: higher means more likely OOD.  For the
covariance-distance scorer this is the raw minimum squared Mahalanobis
distance (a nonnegative number); for the cosine scorer it is the negated
maximum cosine similarity to the validation bank; the softmax-probability
scorer returns one minus the top class probability and the energy scorer the
negative log-sum-exp of the class logits.

Detector files use the "ood-det/1" JSON format described in the README.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg
from .errors import DimensionMismatch, EmptyInput, FormatError, MissingClass, NotADistribution, ZeroVector

DETECTOR_FORMAT = "ood-det/1"
SCORER_KINDS = ("msp", "energy", "maha", "cosine")


@dataclass
class ClassifierHead:
    """Softmax layer weights (one row per class) and bias."""

    weights: np.ndarray
    bias: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class EnergyDetector:
    head: ClassifierHead
    include_bias: bool = True


@dataclass
class MahaDetector:
    class_means: list[np.ndarray]
    cov_pinv: np.ndarray
    dim: int


@dataclass
class CosineDetector:
    bank: np.ndarray  # (n, dim), rows unit-norm


@dataclass
class DetectorArtifact:
    """A fitted detector of one of the four kinds, ready to score and persist."""

    kind: str
    dim: int
    num_classes: int
    payload: object

    def score(self, rep: np.ndarray) -> float:
        rep = np.asarray(rep, dtype=np.float64)
        if self.kind == "msp":
            head: ClassifierHead = self.payload
            logits = head.weights @ rep + head.bias
            shifted = np.exp(logits - np.max(logits))
            return score_msp(shifted / np.sum(shifted))
        if self.kind == "energy":
            det: EnergyDetector = self.payload
            return score_energy(det.head, rep, include_bias=det.include_bias)
        if self.kind == "maha":
            return score_maha(self.payload, rep)
        if self.kind == "cosine":
            return score_cosine(self.payload, rep)
        raise FormatError(f"unknown detector kind {self.kind!r}")


def score_msp(probs: np.ndarray) -> float:
    """One minus the maximum class probability."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise NotADistribution("probs must be a nonempty vector")
    if np.any(probs < -1e-12) or abs(float(np.sum(probs)) - 1.0) > 1e-8:
        raise NotADistribution(f"probs sum to {float(np.sum(probs)):.12f}, expected 1")
    return 1.0 - float(np.max(probs))


def score_energy(head: ClassifierHead, rep: np.ndarray, include_bias: bool = True) -> float:
    """Negative log-sum-exp of the class logits at ``rep``.

    The softmax head here has a bias, so it is included by default; pass
    ``include_bias=False`` for the bias-free variant.
    """
    rep = np.asarray(rep, dtype=np.float64)
    if rep.shape != (head.dim,):
        raise DimensionMismatch(f"rep has shape {rep.shape}, head expects ({head.dim},)")
    logits = head.weights @ rep
    if include_bias:
        logits = logits + head.bias
    peak = float(np.max(logits))
    return -(peak + float(np.log(np.sum(np.exp(logits - peak)))))


def fit_maha(val_reps: Sequence[np.ndarray], labels: Sequence[int]) -> MahaDetector:
    """Fit per-class means and a shared covariance, then pseudo-invert it.

    Degenerate data (zero covariance) is fine: the pseudo-inverse of the zero
    matrix is zero and every score collapses to 0.
    """
    if len(val_reps) == 0:
        raise EmptyInput("fit_maha needs at least one representation")
    if len(val_reps) != len(labels):
        raise DimensionMismatch(f"{len(val_reps)} representations for {len(labels)} labels")
    num_classes = max(labels) + 1
    present = set(labels)
    missing = set(range(num_classes)) - present
    if missing:
        raise MissingClass(f"classes {sorted(missing)} absent from the fitting split")
    means = []
    for class_id in range(num_classes):
        rows = [np.asarray(r, dtype=np.float64) for r, y in zip(val_reps, labels) if y == class_id]
        means.append(linalg.mean_vector(rows))
    cov = linalg.shared_covariance([np.asarray(r, dtype=np.float64) for r in val_reps], list(labels), means)
    return MahaDetector(class_means=means, cov_pinv=linalg.pseudo_inverse(cov), dim=means[0].shape[0])


def score_maha(det: MahaDetector, rep: np.ndarray) -> float:
    """Minimum squared Mahalanobis distance to any class mean (always >= 0)."""
    rep = np.asarray(rep, dtype=np.float64)
    if rep.shape != (det.dim,):
        raise DimensionMismatch(f"rep has shape {rep.shape}, detector expects ({det.dim},)")
    best = None
    for mean in det.class_means:
        diff = rep - mean
        dist = float(diff @ det.cov_pinv @ diff)
        if best is None or dist < best:
            best = dist
    return max(best, 0.0)


def fit_cosine(val_reps: Sequence[np.ndarray]) -> CosineDetector:
    """Store the normalized validation representations as the similarity bank."""
    if len(val_reps) == 0:
        raise EmptyInput("fit_cosine needs at least one representation")
    bank = np.stack([linalg.l2_normalize(np.asarray(r, dtype=np.float64)) for r in val_reps])
    return CosineDetector(bank=bank)


def score_cosine(det: CosineDetector, rep: np.ndarray) -> float:
    """Negated maximum cosine similarity to the bank; range [-1, 1]."""
    rep = np.asarray(rep, dtype=np.float64)
    norm = float(np.linalg.norm(rep))
    if norm == 0.0:
        raise ZeroVector("cannot score the zero vector with cosine similarity")
    if rep.shape[0] != det.bank.shape[1]:
        raise DimensionMismatch(f"rep has dimension {rep.shape[0]}, bank has {det.bank.shape[1]}")
    return -float(np.max(det.bank @ (rep / norm)))


def fit_msp(head: ClassifierHead) -> DetectorArtifact:
    return DetectorArtifact(kind="msp", dim=head.dim, num_classes=head.num_classes, payload=head)


def fit_energy(head: ClassifierHead, include_bias: bool = True) -> DetectorArtifact:
    return DetectorArtifact(kind="energy", dim=head.dim, num_classes=head.num_classes, payload=EnergyDetector(head=head, include_bias=include_bias))


def maha_artifact(det: MahaDetector) -> DetectorArtifact:
    return DetectorArtifact(kind="maha", dim=det.dim, num_classes=len(det.class_means), payload=det)


def cosine_artifact(det: CosineDetector, num_classes: int) -> DetectorArtifact:
    return DetectorArtifact(kind="cosine", dim=det.bank.shape[1], num_classes=num_classes, payload=det)


def save_detector(artifact: DetectorArtifact, path) -> None:
    """Serialize a fitted detector as ood-det/1 JSON."""
    if artifact.kind == "maha":
        det: MahaDetector = artifact.payload
        payload = {"means": [m.tolist() for m in det.class_means], "cov_pinv": det.cov_pinv.reshape(-1).tolist()}
    elif artifact.kind == "cosine":
        payload = {"bank": [row.tolist() for row in artifact.payload.bank]}
    elif artifact.kind == "msp":
        head = artifact.payload
        payload = {"softmax_weights": head.weights.tolist(), "softmax_bias": head.bias.tolist()}
    elif artifact.kind == "energy":
        det = artifact.payload
        payload = {"softmax_weights": det.head.weights.tolist(), "softmax_bias": det.head.bias.tolist(), "include_bias": det.include_bias}
    else:
        raise FormatError(f"unknown detector kind {artifact.kind!r}")
    body = {"format": DETECTOR_FORMAT, "kind": artifact.kind, "dim": artifact.dim, "num_classes": artifact.num_classes, "payload": payload}
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(body, handle)
        handle.write("\n")


def load_detector(path) -> DetectorArtifact:
    """Load and validate an ood-det/1 file; kind/payload mismatches raise FormatError."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            body = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not valid JSON: {exc.msg}")
    if not isinstance(body, dict):
        raise FormatError("detector file must contain a JSON object")
    tag = body.get("format")
    if tag != DETECTOR_FORMAT:
        raise FormatError(f"unsupported version {tag!r}; this build reads {DETECTOR_FORMAT!r}")
    kind = body.get("kind")
    if kind not in SCORER_KINDS:
        raise FormatError(f"unknown detector kind {kind!r}")
    try:
        dim = int(body["dim"])
        num_classes = int(body["num_classes"])
        payload = body["payload"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad detector field: {exc}")

    try:
        if kind == "maha":
            means = [np.asarray(m, dtype=np.float64) for m in payload["means"]]
            flat = np.asarray(payload["cov_pinv"], dtype=np.float64)
            if len(means) != num_classes or any(m.shape != (dim,) for m in means):
                raise FormatError("means do not match the declared dim / num_classes")
            if flat.shape != (dim * dim,):
                raise FormatError(f"cov_pinv has {flat.size} entries, expected {dim * dim}")
            return DetectorArtifact(kind, dim, num_classes, MahaDetector(means, flat.reshape(dim, dim), dim))
        if kind == "cosine":
            bank = np.asarray(payload["bank"], dtype=np.float64)
            if bank.ndim != 2 or bank.shape[1] != dim or bank.shape[0] == 0:
                raise FormatError("bank does not match the declared dim")
            return DetectorArtifact(kind, dim, num_classes, CosineDetector(bank))
        weights = np.asarray(payload["softmax_weights"], dtype=np.float64)
        bias = np.asarray(payload["softmax_bias"], dtype=np.float64)
        if weights.shape != (num_classes, dim) or bias.shape != (num_classes,):
            raise FormatError("softmax head does not match the declared dim / num_classes")
        head = ClassifierHead(weights=weights, bias=bias)
        if kind == "msp":
            return DetectorArtifact(kind, dim, num_classes, head)
        return DetectorArtifact(kind, dim, num_classes, EnergyDetector(head=head, include_bias=bool(payload.get("include_bias", True))))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed {kind} payload: {exc}")
