import csv
import json

import pytest

from oodkit.cli import main
from oodkit.data import load_embeddings

BENCH_CONFIG = """
source = synth
synth.num_classes = 3
synth.dim = 6
synth.per_class = 30
synth.std = 0.8
synth.separation = 6.0
synth.displacement = 12.0
synth.seed = 5
loss.mode = margin
loss.weight = 2.0
encoder.hidden_dims = 12
encoder.rep_dim = 6
optim.lr = 3e-3
optim.epochs = 4
optim.batch_size = 12
scorers = msp,maha
seeds = 1
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "run.cfg"
    config.write_text(BENCH_CONFIG, encoding="utf-8")
    assert main(["gen-synth", "--config", str(config), "--out", str(root / "data")]) == 0
    assert main(["train", "--config", str(config), "--out", str(root / "runs")]) == 0
    return root, config


def test_gen_synth_outputs_load(workdir):
    root, _ = workdir
    id_ds = load_embeddings(root / "data" / "id.jsonl")
    ood_ds = load_embeddings(root / "data" / "ood.jsonl")
    assert id_ds.num_classes == 3
    assert len(ood_ds.examples) == 30
    assert all(ex.label is None for ex in ood_ds.examples)


def test_train_outputs(workdir):
    root, _ = workdir
    assert (root / "runs" / "ckpt-seed1.json").exists()
    assert (root / "runs" / "detector-msp-seed1.json").exists()
    assert (root / "runs" / "detector-maha-seed1.json").exists()
    runs = (root / "runs" / "runs.csv").read_text().strip().splitlines()
    assert runs[0] == "seed,best_step,val_accuracy,val_cont_loss"
    assert len(runs) == 2


def test_fit_and_score_with_checkpoint(workdir, capsys):
    root, _ = workdir
    ckpt = root / "runs" / "ckpt-seed1.json"
    det = root / "fit-maha.json"
    assert main(["fit", "--ckpt", str(ckpt), "--val", str(root / "data" / "id.jsonl"), "--scorer", "maha", "--out", str(det)]) == 0
    body = json.loads(det.read_text())
    assert body["format"] == "ood-det/1" and body["kind"] == "maha"

    out_csv = root / "scores.csv"
    assert main(["score", "--det", str(det), "--input", str(root / "data" / "ood.jsonl"), "--out", str(out_csv), "--ckpt", str(ckpt)]) == 0
    with open(out_csv) as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 30
    assert all(float(r["score"]) >= 0.0 for r in rows)


def test_fit_without_checkpoint_on_representations(workdir):
    root, _ = workdir
    det = root / "raw-maha.json"
    code = main(["fit", "--val", str(root / "data" / "id.jsonl"), "--scorer", "maha", "--out", str(det)])
    assert code == 0
    assert json.loads(det.read_text())["dim"] == 6


def test_fit_msp_without_checkpoint_fails_validation(workdir):
    root, _ = workdir
    code = main(["fit", "--val", str(root / "data" / "id.jsonl"), "--scorer", "msp", "--out", str(root / "x.json")])
    assert code == 1


def test_eval_prints_rows_and_emits_reports(workdir, capsys):
    root, _ = workdir
    out = root / "report"
    code = main(
        [
            "eval",
            "--ckpt", str(root / "runs" / "ckpt-seed1.json"),
            "--id", str(root / "data" / "id.jsonl"),
            "--ood", str(root / "data" / "ood.jsonl"),
            "--scorers", "msp,maha",
            "--out", str(out),
        ]
    )
    assert code == 0
    captured = capsys.readouterr().out.strip().splitlines()
    assert captured[0] == "id_dataset,ood_dataset,loss_mode,scorer,auroc,far95,accuracy,seed"
    assert len(captured) == 3
    assert (out / "report.csv").exists()
    assert (out / "report.md").exists()
    assert (out / "report-bars.png").exists()


def test_project_writes_csv_and_figure(workdir):
    root, _ = workdir
    out_csv = root / "proj.csv"
    code = main(["project", "--ckpt", str(root / "runs" / "ckpt-seed1.json"), "--input", str(root / "data" / "id.jsonl"), "--out", str(out_csv)])
    assert code == 0
    lines = out_csv.read_text().strip().splitlines()
    assert lines[0] == "id,split,group,x,y"
    assert len(lines) == 91  # header + 90 examples
    assert (root / "proj.png").exists()


def test_novel_class_command(tmp_path, capsys):
    config = tmp_path / "novel.cfg"
    config.write_text(BENCH_CONFIG.replace("optim.epochs = 4", "optim.epochs = 2"), encoding="utf-8")
    code = main(["novel-class", "--config", str(config), "--trials", "3", "--out", str(tmp_path / "novel")])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("id_dataset,")
    assert len(lines) == 1 + 3 * 2 + 2  # header + trials x scorers + avg per scorer
    assert (tmp_path / "novel" / "novel-class.csv").exists()


def test_exit_code_validation_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("optim.warp_speed = 9", encoding="utf-8")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_exit_code_io_error(tmp_path):
    assert main(["train", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "o")]) == 2


def test_exit_code_bad_usage():
    assert main(["definitely-not-a-command"]) == 1


def test_help_exits_zero():
    assert main(["--help"]) == 0
