"""Command-line interface.

Exit codes: 0 on success, 1 on validation errors (bad config, malformed
files, bad usage), 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import encoder, harness, linalg, scorers
from .config import RunConfig, load_config, parse_config_text
from .data import Dataset, examples_as_dataset, gen_synthetic, load_embeddings, save_embeddings
from .errors import ConfigError, OodkitError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oodkit", description="Train classifiers with contrastive auxiliaries and score out-of-distribution inputs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic benchmark dataset pair")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory for id.jsonl / ood.jsonl")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train one run per seed and save checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed list with one seed")

    p = sub.add_parser("fit", help="fit a detector on the validation split of an embedding file")
    p.add_argument("--ckpt", default=None, help="encode inputs through this checkpoint first; omit to treat vectors as representations")
    p.add_argument("--val", required=True)
    p.add_argument("--scorer", required=True, choices=list(scorers.SCORER_KINDS))
    p.add_argument("--out", required=True)

    p = sub.add_parser("score", help="score every example in a file with a saved detector")
    p.add_argument("--det", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ckpt", default=None, help="encode inputs through this checkpoint first; omit to treat vectors as representations")

    p = sub.add_parser("eval", help="evaluate a checkpoint on an (ID, OOD) dataset pair")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--id", dest="id_path", required=True)
    p.add_argument("--ood", required=True)
    p.add_argument("--scorers", default=None, help="comma-separated subset, default from the checkpoint config")
    p.add_argument("--out", default=None, help="emit report files (CSV, Markdown, figures) into this directory")

    p = sub.add_parser("novel-class", help="hold out one class per trial and detect it as OOD")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("project", help="export a 2-D PCA projection of encoded representations")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="CSV path; a scatter figure is written next to it")
    return parser


def _cmd_gen_synth(args) -> int:
    cfg = load_config(args.config)
    if cfg.source != "synth":
        raise ConfigError("gen-synth requires a config with source = synth")
    if args.seed is not None:
        cfg.synth.seed = args.seed
    id_ds, ood = gen_synthetic(cfg.synth)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    save_embeddings(id_ds, outdir / "id.jsonl")
    save_embeddings(examples_as_dataset(ood, id_ds.dim, id_ds.num_classes, f"{id_ds.name}-ood"), outdir / "ood.jsonl")
    print(f"wrote {outdir / 'id.jsonl'} ({len(id_ds.examples)} examples) and {outdir / 'ood.jsonl'} ({len(ood)} examples)")
    return 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    dataset, _ = harness.load_run_data(cfg)
    summary_path = outdir / "runs.csv"
    with open(summary_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seed", "best_step", "val_accuracy", "val_cont_loss"])
        for seed in seeds:
            ckpt = harness.train_run(cfg, seed, dataset=dataset)
            ckpt_path = outdir / f"ckpt-seed{seed}.json"
            harness.save_checkpoint(ckpt, cfg, ckpt_path)
            for kind, artifact in ckpt.detectors.items():
                scorers.save_detector(artifact, outdir / f"detector-{kind}-seed{seed}.json")
            writer.writerow([seed, ckpt.step, format(ckpt.val_accuracy, ".12g"), format(ckpt.val_cont_loss, ".12g")])
            print(f"seed {seed}: best step {ckpt.step}, val accuracy {ckpt.val_accuracy:.4f} -> {ckpt_path}")
    return 0


def _config_from_ckpt_meta(meta: dict) -> RunConfig:
    echo = meta.get("config", {})
    return parse_config_text("\n".join(f"{key} = {value}" for key, value in echo.items()))


def _representations(params: encoder.EncoderParams | None, dataset: Dataset, examples) -> list[np.ndarray]:
    if params is not None:
        return [encoder.forward(params, ex.vector).rep for ex in examples]
    return [np.asarray(ex.vector, dtype=np.float64) for ex in examples]


def _cmd_fit(args) -> int:
    val_ds = load_embeddings(args.val)
    params = None
    if args.ckpt is not None:
        params, _ = harness.load_checkpoint(args.ckpt)
    val = val_ds.val
    if not val:
        raise ConfigError(f"{args.val} has no validation-split rows to fit on")
    reps = _representations(params, val_ds, val)
    labels = [ex.label for ex in val]
    if args.scorer == "maha":
        artifact = scorers.maha_artifact(scorers.fit_maha(reps, labels))
    elif args.scorer == "cosine":
        artifact = scorers.cosine_artifact(scorers.fit_cosine(reps), val_ds.num_classes)
    else:
        if params is None:
            raise ConfigError(f"fitting the {args.scorer} detector needs --ckpt for the softmax head")
        head = scorers.ClassifierHead(weights=params.softmax_weights, bias=params.softmax_bias)
        artifact = scorers.fit_msp(head) if args.scorer == "msp" else scorers.fit_energy(head)
    scorers.save_detector(artifact, args.out)
    print(f"fitted {args.scorer} detector on {len(val)} validation rows -> {args.out}")
    return 0


def _cmd_score(args) -> int:
    artifact = scorers.load_detector(args.det)
    input_ds = load_embeddings(args.input)
    params = None
    if args.ckpt is not None:
        params, _ = harness.load_checkpoint(args.ckpt)
    reps = _representations(params, input_ds, input_ds.examples)
    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "split", "score"])
        for ex, rep in zip(input_ds.examples, reps):
            writer.writerow([ex.id, ex.split, format(artifact.score(rep), ".12g")])
    print(f"scored {len(reps)} examples with {artifact.kind} -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    params, meta = harness.load_checkpoint(args.ckpt)
    cfg = _config_from_ckpt_meta(meta)
    if args.scorers:
        cfg.scorers = [k.strip() for k in args.scorers.split(",") if k.strip()]
        cfg.validate()
    id_ds = load_embeddings(args.id_path)
    ood_ds = load_embeddings(args.ood)
    ckpt = harness.rebuild_checkpoint(cfg, params, id_ds, meta)
    reports = harness.evaluate_pair(ckpt, id_ds, ood_ds.examples, cfg.scorers, ood_name=ood_ds.name)
    writer = csv.writer(sys.stdout)
    writer.writerow(harness.REPORT_COLUMNS)
    for row in reports:
        writer.writerow([harness._format_cell(getattr(row, col)) for col in harness.REPORT_COLUMNS])
    if args.out:
        written = harness.emit_reports(reports, args.out)
        print("\n".join(f"wrote {path}" for path in written), file=sys.stderr)
    return 0


def _cmd_novel_class(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    result = harness.run_novel_class(cfg, args.trials)
    writer = csv.writer(sys.stdout)
    writer.writerow(harness.REPORT_COLUMNS)
    for row in result.trial_reports + result.averages:
        writer.writerow([harness._format_cell(getattr(row, col)) for col in harness.REPORT_COLUMNS])
    outdir = args.out or cfg.out_dir
    if outdir:
        harness.emit_reports(result.trial_reports + result.averages, outdir, prefix="novel-class", include_averages=False)
    return 0


def _cmd_project(args) -> int:
    params, _ = harness.load_checkpoint(args.ckpt)
    input_ds = load_embeddings(args.input)
    reps = _representations(params, input_ds, input_ds.examples)
    points = linalg.pca_project_2d(reps)
    groups = ["ood" if ex.label is None else f"class{ex.label}" for ex in input_ds.examples]
    out_csv = Path(args.out)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "split", "group", "x", "y"])
        for ex, group, (x, y) in zip(input_ds.examples, groups, points):
            writer.writerow([ex.id, ex.split, group, format(float(x), ".12g"), format(float(y), ".12g")])
    from . import plots

    plots.render_projection(points, groups, out_csv.with_suffix(".png"))
    print(f"projected {len(reps)} examples -> {out_csv} and {out_csv.with_suffix('.png')}")
    return 0


_COMMANDS = {
    "gen-synth": _cmd_gen_synth,
    "train": _cmd_train,
    "fit": _cmd_fit,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "novel-class": _cmd_novel_class,
    "project": _cmd_project,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        # argparse exits 2 on usage errors; the CLI contract reserves 2 for I/O.
        return 0 if exit_request.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except OodkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
