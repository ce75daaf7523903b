"""Training objectives: cross-entropy plus two contrastive auxiliaries.

The similarity-based contrastive loss operates on L2-normalized
representations with a temperature; the margin-based loss pulls same-class
representations together and pushes different-class pairs beyond an adaptive
margin (the largest same-class pairwise distance in the batch).  Both return
analytic per-example gradients.

Anchors without a same-class partner in the batch are skipped (contribute
zero) in both losses; single-class batches likewise skip the push term.  The
adaptive margin is treated as a constant during differentiation by default
(``margin_grad="stop"``); ``margin_grad="flow"`` differentiates through the
pair attaining the maximum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BatchTooSmall,
    InvalidConfig,
    LabelOutOfRange,
    NoPositivePairs,
    NotNormalized,
    ShapeMismatch,
    ZeroVector,
)

LOSS_MODES = ("none", "scl", "margin")
DISTANCE_METRICS = ("l2", "l1", "cosine")
MARGIN_GRAD_MODES = ("stop", "flow")


@dataclass
class LossConfig:
    """Contrastive-loss settings surfaced in the run configuration."""

    mode: str = "none"
    temperature: float = 0.3
    weight: float = 2.0
    metric: str = "l2"
    margin_grad: str = "stop"

    def validate(self) -> None:
        if self.mode not in LOSS_MODES:
            raise InvalidConfig(f"loss mode must be one of {LOSS_MODES}, got {self.mode!r}")
        if self.temperature <= 0:
            raise InvalidConfig(f"temperature must be positive, got {self.temperature}")
        if self.weight < 0:
            raise InvalidConfig(f"contrastive weight must be >= 0, got {self.weight}")
        if self.metric not in DISTANCE_METRICS:
            raise InvalidConfig(f"metric must be one of {DISTANCE_METRICS}, got {self.metric!r}")
        if self.margin_grad not in MARGIN_GRAD_MODES:
            raise InvalidConfig(f"margin_grad must be one of {MARGIN_GRAD_MODES}, got {self.margin_grad!r}")


@dataclass
class LossReport:
    """Scalar losses plus per-example gradients on logits / unit_rep / rep."""

    ce: float
    cont: float
    total: float
    grad_logits: list[np.ndarray] = field(default_factory=list)
    grad_unit_rep: list[np.ndarray] = field(default_factory=list)
    grad_rep: list[np.ndarray] = field(default_factory=list)


def cross_entropy(logits_list: Sequence[np.ndarray], labels: Sequence[int]) -> tuple[float, list[np.ndarray]]:
    """Mean negative log-softmax of the true class; gradient (p - onehot)/M."""
    if len(logits_list) != len(labels):
        raise ShapeMismatch(f"{len(logits_list)} logit rows for {len(labels)} labels")
    if not logits_list:
        raise BatchTooSmall("cross_entropy needs at least one example")
    batch = len(logits_list)
    total = 0.0
    grads: list[np.ndarray] = []
    for logits, label in zip(logits_list, labels):
        logits = np.asarray(logits, dtype=np.float64)
        num_classes = logits.shape[0]
        if label is None or label < 0 or label >= num_classes:
            raise LabelOutOfRange(f"label {label} outside 0..{num_classes - 1}")
        shifted = logits - np.max(logits)
        log_norm = np.log(np.sum(np.exp(shifted)))
        total += log_norm - shifted[label]
        probs = np.exp(shifted - log_norm)
        grad = probs.copy()
        grad[label] -= 1.0
        grads.append(grad / batch)
    return total / batch, grads


def scl_loss(unit_reps: Sequence[np.ndarray], labels: Sequence[int], temperature: float) -> tuple[float, list[np.ndarray]]:
    """Temperature-scaled contrastive loss over unit-norm representations.

    For each anchor with at least one same-class partner, pulls the partner
    similarities up against the log-sum-exp over all other batch members.
    Returns the ambient gradient with respect to each unit representation.
    """
    batch = len(unit_reps)
    if batch < 2:
        raise BatchTooSmall(f"contrastive loss needs a batch of >= 2, got {batch}")
    if temperature <= 0:
        raise InvalidConfig(f"temperature must be positive, got {temperature}")
    z = np.stack([np.asarray(v, dtype=np.float64) for v in unit_reps])
    norms = np.linalg.norm(z, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-9:
        raise NotNormalized("unit_reps must have unit norm within 1e-9")
    labels_arr = np.asarray(labels)

    sims = z @ z.T
    coeff = np.zeros((batch, batch))
    loss = 0.0
    for i in range(batch):
        anchors = np.arange(batch) != i
        positives = anchors & (labels_arr == labels_arr[i])
        num_pos = int(np.count_nonzero(positives))
        if num_pos == 0:
            continue
        scaled = sims[i, anchors] / temperature
        peak = np.max(scaled)
        exp = np.exp(scaled - peak)
        log_norm = peak + np.log(np.sum(exp))
        loss += (-1.0 / (batch * num_pos)) * float(np.sum(sims[i, positives] / temperature - log_norm))
        softmax_row = np.zeros(batch)
        softmax_row[anchors] = exp / np.sum(exp)
        coeff[i] += softmax_row / (batch * temperature)
        coeff[i, positives] -= 1.0 / (batch * num_pos * temperature)
    grad = (coeff + coeff.T) @ z
    return loss, [grad[i] for i in range(batch)]


def _pair_distance(a: np.ndarray, b: np.ndarray, metric: str) -> float:
    if metric == "l2":
        diff = a - b
        return float(diff @ diff)
    if metric == "l1":
        return float(np.sum(np.abs(a - b)))
    if metric == "cosine":
        norm_a = float(np.linalg.norm(a))
        norm_b = float(np.linalg.norm(b))
        if norm_a == 0.0 or norm_b == 0.0:
            raise ZeroVector("cosine distance is undefined for the zero vector")
        return 1.0 - float(a @ b) / (norm_a * norm_b)
    raise InvalidConfig(f"metric must be one of {DISTANCE_METRICS}, got {metric!r}")


def _pair_distance_grads(a: np.ndarray, b: np.ndarray, metric: str) -> tuple[float, np.ndarray, np.ndarray]:
    """Distance and its gradients with respect to both endpoints."""
    if metric == "l2":
        diff = a - b
        return float(diff @ diff), 2.0 * diff, -2.0 * diff
    if metric == "l1":
        diff = a - b
        sign = np.sign(diff)
        return float(np.sum(np.abs(diff))), sign, -sign
    if metric == "cosine":
        norm_a = float(np.linalg.norm(a))
        norm_b = float(np.linalg.norm(b))
        if norm_a == 0.0 or norm_b == 0.0:
            raise ZeroVector("cosine distance is undefined for the zero vector")
        cos = float(a @ b) / (norm_a * norm_b)
        grad_a = -(b / (norm_a * norm_b) - cos * a / (norm_a * norm_a))
        grad_b = -(a / (norm_a * norm_b) - cos * b / (norm_b * norm_b))
        return 1.0 - cos, grad_a, grad_b
    raise InvalidConfig(f"metric must be one of {DISTANCE_METRICS}, got {metric!r}")


def adaptive_margin(reps: Sequence[np.ndarray], labels: Sequence[int], metric: str = "l2") -> float:
    """Largest same-class pairwise distance in the batch."""
    best: float | None = None
    for i in range(len(reps)):
        for j in range(len(reps)):
            if i == j or labels[i] != labels[j]:
                continue
            dist = _pair_distance(np.asarray(reps[i], dtype=np.float64), np.asarray(reps[j], dtype=np.float64), metric)
            if best is None or dist > best:
                best = dist
    if best is None:
        raise NoPositivePairs("no same-class pair in the batch")
    return best


def margin_loss(
    reps: Sequence[np.ndarray],
    labels: Sequence[int],
    metric: str = "l2",
    margin_grad: str = "stop",
    margin_value: float | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Pull term plus hinged push term, scaled by 1/(dim * batch).

    ``margin_value`` overrides the adaptive margin (used by gradient checks
    that freeze the margin).  With ``margin_grad="stop"`` the margin is a
    constant for differentiation; ``"flow"`` also routes gradient through the
    pair attaining the maximum.
    """
    batch = len(reps)
    if batch < 2:
        raise BatchTooSmall(f"margin loss needs a batch of >= 2, got {batch}")
    if margin_grad not in MARGIN_GRAD_MODES:
        raise InvalidConfig(f"margin_grad must be one of {MARGIN_GRAD_MODES}, got {margin_grad!r}")
    vectors = [np.asarray(v, dtype=np.float64) for v in reps]
    dim = vectors[0].shape[0]
    labels_arr = list(labels)

    # Locate the adaptive margin and the (first) pair attaining it.
    margin = margin_value
    argmax_pair: tuple[int, int] | None = None
    if margin is None:
        margin = 0.0
        has_pair = False
        for i in range(batch):
            for j in range(batch):
                if i == j or labels_arr[i] != labels_arr[j]:
                    continue
                dist = _pair_distance(vectors[i], vectors[j], metric)
                if not has_pair or dist > margin:
                    margin = dist
                    argmax_pair = (i, j)
                    has_pair = True

    scale = 1.0 / (dim * batch)
    loss = 0.0
    grads = [np.zeros(dim) for _ in range(batch)]
    margin_coeff = 0.0
    for i in range(batch):
        positives = [j for j in range(batch) if j != i and labels_arr[j] == labels_arr[i]]
        negatives = [j for j in range(batch) if j != i and labels_arr[j] != labels_arr[i]]
        if positives:
            weight = scale / len(positives)
            for p in positives:
                dist, grad_i, grad_p = _pair_distance_grads(vectors[i], vectors[p], metric)
                loss += weight * dist
                grads[i] += weight * grad_i
                grads[p] += weight * grad_p
        if negatives:
            weight = scale / len(negatives)
            for n in negatives:
                dist, grad_i, grad_n = _pair_distance_grads(vectors[i], vectors[n], metric)
                hinge = margin - dist
                if hinge > 0.0:
                    loss += weight * hinge
                    grads[i] -= weight * grad_i
                    grads[n] -= weight * grad_n
                    margin_coeff += weight

    if margin_grad == "flow" and margin_coeff > 0.0 and argmax_pair is not None:
        i, j = argmax_pair
        _, grad_i, grad_j = _pair_distance_grads(vectors[i], vectors[j], metric)
        grads[i] += margin_coeff * grad_i
        grads[j] += margin_coeff * grad_j
    return loss, grads


def joint_loss(
    ce: float,
    grad_logits: Sequence[np.ndarray],
    cont: float,
    cont_grads: Sequence[np.ndarray],
    cont_target: str | None,
    weight: float,
) -> LossReport:
    """Combine the classification and contrastive losses: total = ce + weight * cont.

    ``cont_target`` names the stream the contrastive gradients act on
    ("unit_rep" or "rep"); None means no contrastive term, and the unused
    gradient streams come back as empty lists.
    """
    batch = len(grad_logits)
    if cont_target not in (None, "unit_rep", "rep"):
        raise InvalidConfig(f"cont_target must be 'unit_rep', 'rep' or None, got {cont_target!r}")
    if cont_target is not None and len(cont_grads) != batch:
        raise ShapeMismatch(f"{len(cont_grads)} contrastive gradients for a batch of {batch}")
    scaled = [weight * np.asarray(g, dtype=np.float64) for g in cont_grads] if cont_target is not None else []
    return LossReport(
        ce=ce,
        cont=float(cont) if cont_target is not None else 0.0,
        total=ce + weight * (cont if cont_target is not None else 0.0),
        grad_logits=[np.asarray(g, dtype=np.float64) for g in grad_logits],
        grad_unit_rep=scaled if cont_target == "unit_rep" else [],
        grad_rep=scaled if cont_target == "rep" else [],
    )


def batch_loss(records, labels: Sequence[int], cfg: LossConfig) -> LossReport:
    """Full training objective for one batch of forward records.

    Single-example batches have no pairs, so the contrastive term is zero by
    the skip rule rather than an error.
    """
    cfg.validate()
    ce, grad_logits = cross_entropy([r.logits for r in records], labels)
    if cfg.mode == "none" or len(records) < 2:
        return joint_loss(ce, grad_logits, 0.0, [], None, cfg.weight)
    if cfg.mode == "scl":
        cont, cont_grads = scl_loss([r.unit_rep for r in records], labels, cfg.temperature)
        return joint_loss(ce, grad_logits, cont, cont_grads, "unit_rep", cfg.weight)
    cont, cont_grads = margin_loss([r.rep for r in records], labels, cfg.metric, cfg.margin_grad)
    return joint_loss(ce, grad_logits, cont, cont_grads, "rep", cfg.weight)
