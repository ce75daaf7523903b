"""End-to-end training and evaluation.

One training run samples batches, optimizes the joint objective, and at every
evaluation interval fits the requested detectors on the validation split and
snapshots the model.  The best snapshot is the one with the highest
validation accuracy, ties broken by the lower validation contrastive loss
(earliest snapshot wins remaining ties); that rule is logged per run.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import encoder, losses, metrics, scorers
from .config import RunConfig, config_echo
from .data import Dataset, Example, batch_iter, gen_synthetic, load_embeddings, load_text_corpus, split_novel_class
from .errors import ConfigError, DivergenceError, FormatError, TooFewClasses
from .losses import LossConfig
from .metrics import EvalReport
from .rng import derive_seed

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "ood-ckpt/1"
REPORT_COLUMNS = ("id_dataset", "ood_dataset", "loss_mode", "scorer", "auroc", "far95", "accuracy", "seed")


@dataclass
class Checkpoint:
    """A parameter snapshot with the detectors fitted from it."""

    params: encoder.EncoderParams
    detectors: dict[str, scorers.DetectorArtifact]
    val_accuracy: float
    val_cont_loss: float
    step: int
    seed: int
    loss_mode: str
    dataset_name: str = ""
    history: list[dict] = field(default_factory=list)


def load_run_data(cfg: RunConfig) -> tuple[Dataset, list[Example]]:
    """Materialize the configured ID dataset and OOD pool."""
    if cfg.source == "synth":
        return gen_synthetic(cfg.synth)
    if cfg.source == "embed":
        id_ds = load_embeddings(cfg.embed_id_path)
        ood = load_embeddings(cfg.embed_ood_path).examples if cfg.embed_ood_path else []
        return id_ds, ood
    id_ds = load_text_corpus(cfg.text_id_path, cfg.text_dim, cfg.text_seed)
    ood = load_text_corpus(cfg.text_ood_path, cfg.text_dim, cfg.text_seed).examples if cfg.text_ood_path else []
    return id_ds, ood


def _contrastive_value(records, labels, loss_cfg: LossConfig) -> float:
    if loss_cfg.mode == "none" or len(records) < 2:
        return 0.0
    if loss_cfg.mode == "scl":
        value, _ = losses.scl_loss([r.unit_rep for r in records], labels, loss_cfg.temperature)
    else:
        value, _ = losses.margin_loss([r.rep for r in records], labels, loss_cfg.metric, loss_cfg.margin_grad)
    return value


def _fit_detectors(cfg: RunConfig, params: encoder.EncoderParams, dataset: Dataset) -> dict[str, scorers.DetectorArtifact]:
    head = scorers.ClassifierHead(weights=params.softmax_weights.copy(), bias=params.softmax_bias.copy())
    fit_pool = dataset.val if cfg.maha_fit_on == "val" else dataset.train + dataset.val
    reps = [encoder.forward(params, ex.vector).rep for ex in fit_pool]
    labels = [ex.label for ex in fit_pool]
    fitted: dict[str, scorers.DetectorArtifact] = {}
    for kind in cfg.scorers:
        if kind == "msp":
            fitted[kind] = scorers.fit_msp(head)
        elif kind == "energy":
            fitted[kind] = scorers.fit_energy(head, include_bias=not cfg.energy_ignore_bias)
        elif kind == "maha":
            fitted[kind] = scorers.maha_artifact(scorers.fit_maha(reps, labels))
        elif kind == "cosine":
            fitted[kind] = scorers.cosine_artifact(scorers.fit_cosine(reps), dataset.num_classes)
    return fitted


def _evaluate_snapshot(cfg: RunConfig, params: encoder.EncoderParams, dataset: Dataset, step: int, seed: int) -> Checkpoint:
    val = dataset.val
    records = [encoder.forward(params, ex.vector) for ex in val]
    predictions = [int(np.argmax(r.probs)) for r in records]
    val_acc = metrics.accuracy(predictions, [ex.label for ex in val])
    val_cont = _contrastive_value(records, [ex.label for ex in val], cfg.loss)
    return Checkpoint(
        params=encoder.copy_params(params),
        detectors=_fit_detectors(cfg, params, dataset),
        val_accuracy=val_acc,
        val_cont_loss=val_cont,
        step=step,
        seed=seed,
        loss_mode=cfg.loss.mode,
        dataset_name=dataset.name,
    )


def _better(candidate: Checkpoint, best: Checkpoint | None) -> bool:
    if math.isnan(candidate.val_accuracy) or math.isnan(candidate.val_cont_loss):
        return False
    if best is None:
        return True
    if candidate.val_accuracy != best.val_accuracy:
        return candidate.val_accuracy > best.val_accuracy
    return candidate.val_cont_loss < best.val_cont_loss


def train_run(cfg: RunConfig, seed: int, dataset: Dataset | None = None) -> Checkpoint:
    """Train for epochs * batches steps, periodically fitting detectors on
    the validation split, and return the best snapshot."""
    cfg.validate()
    if dataset is None:
        dataset, _ = load_run_data(cfg)
    train = dataset.train
    if not train:
        raise ConfigError("training requires a nonempty train split")
    if not dataset.val:
        raise ConfigError("training requires a nonempty validation split for detector fitting")

    params = encoder.init_params(dataset.dim, cfg.hidden_dims, cfg.rep_dim, dataset.num_classes, seed)
    batches_per_epoch = math.ceil(len(train) / cfg.batch_size)
    total_steps = cfg.epochs * batches_per_epoch
    eval_every = cfg.eval_every if cfg.eval_every > 0 else batches_per_epoch
    state = encoder.init_adam(params, cfg.lr, total_steps)

    history: list[dict] = []
    initial = _evaluate_snapshot(cfg, params, dataset, step=0, seed=seed)
    history.append({"step": 0, "val_accuracy": initial.val_accuracy, "val_cont_loss": initial.val_cont_loss})

    best: Checkpoint | None = None
    step = 0
    for epoch in range(cfg.epochs):
        for batch in batch_iter(dataset, cfg.batch_size, derive_seed(seed, "epoch", epoch)):
            records = [encoder.forward(params, ex.vector) for ex in batch]
            labels = [ex.label for ex in batch]
            report = losses.batch_loss(records, labels, cfg.loss)
            if not math.isfinite(report.total):
                raise DivergenceError(f"loss became non-finite ({report.total})", step=step)
            grads = encoder.backward(
                params,
                records,
                grad_logits=report.grad_logits,
                grad_rep=report.grad_rep or None,
                grad_unit_rep=report.grad_unit_rep or None,
            )
            params, state = encoder.adam_step(state, params, grads)
            step += 1
            if step % eval_every == 0 or step == total_steps:
                snapshot = _evaluate_snapshot(cfg, params, dataset, step=step, seed=seed)
                history.append({"step": step, "val_accuracy": snapshot.val_accuracy, "val_cont_loss": snapshot.val_cont_loss})
                if _better(snapshot, best):
                    best = snapshot
    if best is None:
        raise DivergenceError("no snapshot with finite validation metrics", step=step)
    best.history = history
    logger.info(
        "run seed=%d mode=%s: best step %d of %d (val acc %.4f, val cont %.6f); selection = highest val accuracy, ties to lowest contrastive loss",
        seed, cfg.loss.mode, best.step, total_steps, best.val_accuracy, best.val_cont_loss,
    )
    return best


def evaluate_pair(
    ckpt: Checkpoint,
    id_dataset: Dataset,
    ood_examples: list[Example],
    scorer_kinds: list[str] | None = None,
    ood_name: str = "ood",
) -> list[EvalReport]:
    """Score the ID test split against an OOD pool with each fitted detector."""
    kinds = scorer_kinds if scorer_kinds is not None else list(ckpt.detectors)
    missing = [k for k in kinds if k not in ckpt.detectors]
    if missing:
        raise ConfigError(f"checkpoint has no fitted detector for {missing}")
    id_test = [ex for ex in id_dataset.test if ex.label is not None]
    if not id_test:
        raise ConfigError("ID dataset has no labeled test examples")
    if not ood_examples:
        raise ConfigError("OOD pool is empty")

    id_records = [encoder.forward(ckpt.params, ex.vector) for ex in id_test]
    ood_records = [encoder.forward(ckpt.params, ex.vector) for ex in ood_examples]
    test_accuracy = metrics.accuracy([int(np.argmax(r.probs)) for r in id_records], [ex.label for ex in id_test])

    reports = []
    for kind in kinds:
        detector = ckpt.detectors[kind]
        id_scores = [detector.score(r.rep) for r in id_records]
        ood_scores = [detector.score(r.rep) for r in ood_records]
        reports.append(
            EvalReport(
                id_dataset=id_dataset.name,
                ood_dataset=ood_name,
                loss_mode=ckpt.loss_mode,
                scorer=kind,
                auroc=metrics.auroc(id_scores, ood_scores),
                far95=metrics.far95(id_scores, ood_scores),
                accuracy=test_accuracy,
                seed=ckpt.seed,
                n_id=len(id_scores),
                n_ood=len(ood_scores),
            )
        )
    return reports


@dataclass
class NovelClassResult:
    trial_reports: list[EvalReport]
    averages: list[EvalReport]
    held_out: list[int]


def run_novel_class(cfg: RunConfig, trials: int) -> NovelClassResult:
    """Hold one class out per trial (seeded rotation), retrain, detect it as OOD."""
    cfg.validate()
    base, _ = load_run_data(cfg)
    if base.num_classes < 3:
        raise TooFewClasses(f"novel-class protocol needs >= 3 classes, got {base.num_classes}")
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    seed = cfg.seeds[0]
    start = derive_seed(seed, "novel-rotation") % base.num_classes
    rows: list[EvalReport] = []
    held_list: list[int] = []
    for trial in range(trials):
        held = (start + trial) % base.num_classes
        held_list.append(held)
        id_ds, ood = split_novel_class(base, held)
        ckpt = train_run(cfg, derive_seed(seed, "novel-trial", trial) % (2**31), dataset=id_ds)
        reports = evaluate_pair(ckpt, id_ds, ood, cfg.scorers, ood_name=f"{base.name}-class{held}")
        for report in reports:
            report.seed = trial
        rows.extend(reports)
    averages = summarize_rows(rows, group_by=("scorer",), id_dataset=base.name, ood_dataset=f"{base.name}-novel", loss_mode=cfg.loss.mode)
    return NovelClassResult(trial_reports=rows, averages=averages, held_out=held_list)


def summarize_rows(rows: list[EvalReport], group_by=("id_dataset", "ood_dataset", "loss_mode", "scorer"), **overrides) -> list[EvalReport]:
    """Macro-average rows into seed="avg" summary rows, grouped by ``group_by``."""
    groups: dict[tuple, list[EvalReport]] = {}
    for row in rows:
        if row.seed == "avg":
            continue
        key = tuple(getattr(row, attr) for attr in group_by)
        groups.setdefault(key, []).append(row)
    averages = []
    for key, members in groups.items():
        attrs = dict(zip(group_by, key))
        accs = [m.accuracy for m in members if m.accuracy is not None]
        averages.append(
            EvalReport(
                id_dataset=overrides.get("id_dataset", attrs.get("id_dataset", members[0].id_dataset)),
                ood_dataset=overrides.get("ood_dataset", attrs.get("ood_dataset", members[0].ood_dataset)),
                loss_mode=overrides.get("loss_mode", attrs.get("loss_mode", members[0].loss_mode)),
                scorer=attrs.get("scorer", members[0].scorer),
                auroc=float(np.mean([m.auroc for m in members])),
                far95=float(np.mean([m.far95 for m in members])),
                accuracy=float(np.mean(accs)) if accs else None,
                seed="avg",
                n_id=members[0].n_id,
                n_ood=members[0].n_ood,
            )
        )
    return averages


def save_checkpoint(ckpt: Checkpoint, cfg: RunConfig, path) -> None:
    """Write the parameter snapshot plus config echo as ood-ckpt/1 JSON."""
    body = {
        "format": CHECKPOINT_FORMAT,
        **encoder.params_to_payload(ckpt.params),
        "step": ckpt.step,
        "seed": ckpt.seed,
        "loss_mode": ckpt.loss_mode,
        "dataset_name": ckpt.dataset_name,
        "val_accuracy": ckpt.val_accuracy,
        "val_cont_loss": ckpt.val_cont_loss,
        "config": config_echo(cfg),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(body, handle)
        handle.write("\n")


def load_checkpoint(path) -> tuple[encoder.EncoderParams, dict]:
    """Read an ood-ckpt/1 file; returns the parameters and the metadata dict."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            body = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not valid JSON: {exc.msg}")
    if not isinstance(body, dict) or body.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"unsupported checkpoint format {body.get('format')!r}; this build reads {CHECKPOINT_FORMAT!r}")
    params = encoder.params_from_payload(body)
    meta = {k: v for k, v in body.items() if k not in ("layers", "softmax_weights", "softmax_bias", "shapes", "format")}
    return params, meta


def rebuild_checkpoint(cfg: RunConfig, params: encoder.EncoderParams, dataset: Dataset, meta: dict) -> Checkpoint:
    """Reconstruct an in-memory checkpoint from saved params by refitting
    detectors on the provided dataset's validation split."""
    return Checkpoint(
        params=params,
        detectors=_fit_detectors(cfg, params, dataset),
        val_accuracy=float(meta.get("val_accuracy", float("nan"))),
        val_cont_loss=float(meta.get("val_cont_loss", float("nan"))),
        step=int(meta.get("step", 0)),
        seed=int(meta.get("seed", 0)),
        loss_mode=str(meta.get("loss_mode", "none")),
        dataset_name=str(meta.get("dataset_name", dataset.name)),
    )


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_report_csv(rows: list[EvalReport], path, include_averages: bool = True) -> None:
    all_rows = list(rows)
    if include_averages and rows:
        all_rows.extend(summarize_rows(rows))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for row in all_rows:
            writer.writerow([_format_cell(getattr(row, col)) for col in REPORT_COLUMNS])


def write_report_markdown(rows: list[EvalReport], path) -> None:
    """Summary table of 'AUROC / FAR95' percent cells, one row per loss/scorer."""
    averages = summarize_rows(rows) if rows else []
    pairs = sorted({(r.id_dataset, r.ood_dataset) for r in averages})
    combos = sorted({(r.loss_mode, r.scorer) for r in averages})
    lines = ["| loss / scorer (AUROC ↑ / FAR95 ↓) | " + " | ".join(f"{p[0]} vs {p[1]}" for p in pairs) + " |"]
    lines.append("|" + " --- |" * (len(pairs) + 1))
    cells = {(r.loss_mode, r.scorer, r.id_dataset, r.ood_dataset): r for r in averages}
    for mode, scorer in combos:
        row = [f"| {mode} + {scorer} |"]
        for id_name, ood_name in pairs:
            report = cells.get((mode, scorer, id_name, ood_name))
            row.append(f" {report.auroc * 100:.1f} / {report.far95 * 100:.1f} |" if report else " |")
        lines.append("".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_reports(
    rows: list[EvalReport],
    outdir,
    projection: tuple[np.ndarray, list[str]] | None = None,
    prefix: str = "report",
    include_averages: bool = True,
) -> list[Path]:
    """Write the CSV, the Markdown summary, and figures into ``outdir``.

    ``projection`` is an optional (points, group-labels) pair from the 2-D
    PCA export; it adds a CSV and a scatter figure.  Returns written paths.
    """
    from . import plots  # deferred: keeps matplotlib out of non-reporting paths

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = outdir / f"{prefix}.csv"
    write_report_csv(rows, csv_path, include_averages=include_averages)
    written.append(csv_path)
    md_path = outdir / f"{prefix}.md"
    write_report_markdown(rows, md_path)
    written.append(md_path)
    if rows:
        bars_path = outdir / f"{prefix}-bars.png"
        plots.render_metric_bars(summarize_rows(rows), bars_path)
        written.append(bars_path)
    if projection is not None:
        points, groups = projection
        proj_csv = outdir / f"{prefix}-projection.csv"
        with open(proj_csv, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["x", "y", "group"])
            for (x, y), group in zip(points, groups):
                writer.writerow([_format_cell(float(x)), _format_cell(float(y)), group])
        written.append(proj_csv)
        proj_png = outdir / f"{prefix}-projection.png"
        plots.render_projection(points, groups, proj_png)
        written.append(proj_png)
    return written
