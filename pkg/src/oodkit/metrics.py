"""Threshold-free detection metrics (AUROC, FAR95) and classification accuracy.

Scores follow the toolkit convention: higher means more OOD.  AUROC is the
exact rank statistic P(ood > id) + 0.5 P(ood = id); FAR95 is the fraction of
OOD scores at or below the smallest threshold accepting at least 95% of the
ID scores (nearest-rank percentile, ties accepted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput, LengthMismatch


@dataclass
class EvalReport:
    """One detection-evaluation row as emitted in the report CSV."""

    id_dataset: str
    ood_dataset: str
    loss_mode: str
    scorer: str
    auroc: float
    far95: float
    accuracy: float | None
    seed: int | str
    n_id: int = 0
    n_ood: int = 0


def _validated(scores: Sequence[float], what: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput(f"{what} scores are empty")
    if not np.all(np.isfinite(arr)):
        raise EmptyInput(f"{what} scores contain non-finite values")
    return arr


def auroc(id_scores: Sequence[float], ood_scores: Sequence[float]) -> float:
    """Exact AUROC via midranks: ties contribute half credit."""
    id_arr = _validated(id_scores, "ID")
    ood_arr = _validated(ood_scores, "OOD")
    combined = np.concatenate([id_arr, ood_arr])
    order = np.argsort(combined, kind="mergesort")
    ranks = np.empty(combined.size, dtype=np.float64)
    i = 0
    while i < combined.size:
        j = i
        while j + 1 < combined.size and combined[order[j + 1]] == combined[order[i]]:
            j += 1
        # 1-based midrank of the tie run [i, j]; halves are exact in binary.
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = float(np.sum(ranks[id_arr.size :]))
    n_ood = ood_arr.size
    u_statistic = rank_sum - n_ood * (n_ood + 1) / 2.0
    return u_statistic / (id_arr.size * n_ood)


def far95(id_scores: Sequence[float], ood_scores: Sequence[float]) -> float:
    """Fraction of OOD accepted when 95% of ID is accepted (score <= threshold)."""
    id_arr = np.sort(_validated(id_scores, "ID"))
    ood_arr = _validated(ood_scores, "OOD")
    threshold = id_arr[math.ceil(0.95 * id_arr.size) - 1]
    return float(np.mean(ood_arr <= threshold))


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Fraction of exact matches."""
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(labels)} labels")
    if len(predictions) == 0:
        raise EmptyInput("accuracy of an empty batch is undefined")
    hits = sum(1 for p, y in zip(predictions, labels) if p == y)
    return hits / len(predictions)
