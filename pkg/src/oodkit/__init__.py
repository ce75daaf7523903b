"""Contrastive classifier training and out-of-distribution scoring toolkit."""

from .config import RunConfig, load_config, parse_config_text
from .data import Dataset, Example, SynthConfig, batch_iter, featurize_hashed_ngrams, gen_synthetic, load_embeddings, save_embeddings, split_novel_class
from .harness import Checkpoint, emit_reports, evaluate_pair, run_novel_class, train_run
from .losses import LossConfig, LossReport, adaptive_margin, batch_loss, cross_entropy, joint_loss, margin_loss, scl_loss
from .metrics import EvalReport, accuracy, auroc, far95
from .scorers import DetectorArtifact, fit_cosine, fit_energy, fit_maha, fit_msp, load_detector, save_detector, score_cosine, score_energy, score_maha, score_msp

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "Dataset",
    "DetectorArtifact",
    "EvalReport",
    "Example",
    "LossConfig",
    "LossReport",
    "RunConfig",
    "SynthConfig",
    "accuracy",
    "adaptive_margin",
    "auroc",
    "batch_iter",
    "batch_loss",
    "cross_entropy",
    "emit_reports",
    "evaluate_pair",
    "far95",
    "featurize_hashed_ngrams",
    "fit_cosine",
    "fit_energy",
    "fit_maha",
    "fit_msp",
    "gen_synthetic",
    "joint_loss",
    "load_config",
    "load_detector",
    "load_embeddings",
    "margin_loss",
    "parse_config_text",
    "run_novel_class",
    "save_detector",
    "save_embeddings",
    "scl_loss",
    "score_cosine",
    "score_energy",
    "score_maha",
    "score_msp",
    "split_novel_class",
    "train_run",
]
