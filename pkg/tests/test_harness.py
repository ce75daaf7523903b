import numpy as np
import pytest

from oodkit import harness
from oodkit.config import RunConfig
from oodkit.data import SynthConfig
from oodkit.errors import ConfigError, DivergenceError, FormatError, TooFewClasses
from oodkit.losses import LossConfig
from oodkit.metrics import EvalReport


def _quick_config(mode="none", **kwargs):
    defaults = dict(
        synth=SynthConfig(num_classes=3, dim=6, per_class=30, std=0.8, separation=6.0, displacement=12.0, seed=5),
        loss=LossConfig(mode=mode, weight=2.0),
        hidden_dims=[12],
        rep_dim=6,
        lr=3e-3,
        epochs=6,
        batch_size=12,
        scorers=["msp", "maha"],
        seeds=[1],
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


@pytest.fixture(scope="module")
def quick_run():
    cfg = _quick_config()
    dataset, ood = harness.load_run_data(cfg)
    ckpt = harness.train_run(cfg, seed=1, dataset=dataset)
    return cfg, dataset, ood, ckpt


def test_plain_cross_entropy_reaches_high_accuracy(quick_run):
    _, _, _, ckpt = quick_run
    assert ckpt.val_accuracy >= 0.95


def test_margin_loss_improves_during_training():
    cfg = _quick_config(mode="margin")
    dataset, _ = harness.load_run_data(cfg)
    ckpt = harness.train_run(cfg, seed=2, dataset=dataset)
    initial = ckpt.history[0]
    final = ckpt.history[-1]
    assert initial["step"] == 0
    assert final["val_cont_loss"] < initial["val_cont_loss"]


def test_training_is_deterministic_per_seed():
    cfg = _quick_config(mode="margin", epochs=3)
    dataset, _ = harness.load_run_data(cfg)
    first = harness.train_run(cfg, seed=3, dataset=dataset)
    second = harness.train_run(cfg, seed=3, dataset=dataset)
    assert first.val_accuracy == second.val_accuracy
    assert first.val_cont_loss == second.val_cont_loss
    assert first.step == second.step
    assert np.array_equal(first.params.softmax_weights, second.params.softmax_weights)


def test_checkpoint_metrics_are_finite(quick_run):
    _, _, _, ckpt = quick_run
    assert np.isfinite(ckpt.val_accuracy)
    assert np.isfinite(ckpt.val_cont_loss)


def test_divergence_raises_with_step_index():
    # lr large enough that the head weights overflow and the logits go inf - inf
    cfg = _quick_config(lr=1e308, epochs=2)
    dataset, _ = harness.load_run_data(cfg)
    old = np.seterr(all="ignore")
    try:
        with pytest.raises(DivergenceError) as err:
            harness.train_run(cfg, seed=4, dataset=dataset)
    finally:
        np.seterr(**old)
    assert err.value.step is not None


def test_evaluate_pair_identical_pools_gives_half_auroc(quick_run):
    cfg, dataset, _, ckpt = quick_run
    mirrored = [ex for ex in dataset.test if ex.label is not None]
    reports = harness.evaluate_pair(ckpt, dataset, mirrored, ["msp", "maha"])
    for report in reports:
        assert report.auroc == 0.5


def test_evaluate_pair_one_report_per_scorer():
    cfg = _quick_config(scorers=["msp", "energy", "maha", "cosine"])
    dataset, ood = harness.load_run_data(cfg)
    ckpt = harness.train_run(cfg, seed=5, dataset=dataset)
    reports = harness.evaluate_pair(ckpt, dataset, ood)
    assert [r.scorer for r in reports] == ["msp", "energy", "maha", "cosine"]
    assert all(r.n_ood == len(ood) for r in reports)


def test_evaluate_pair_requires_fitted_scorer(quick_run):
    cfg, dataset, ood, ckpt = quick_run
    with pytest.raises(ConfigError):
        harness.evaluate_pair(ckpt, dataset, ood, ["cosine"])


def test_novel_class_rotation_covers_every_class(tmp_path):
    cfg = _quick_config(epochs=2, scorers=["maha"])
    result = harness.run_novel_class(cfg, trials=3)
    assert sorted(result.held_out) == [0, 1, 2]
    maha_rows = [r for r in result.trial_reports if r.scorer == "maha"]
    assert len(maha_rows) == 3
    avg = [r for r in result.averages if r.scorer == "maha"][0]
    assert abs(avg.auroc - np.mean([r.auroc for r in maha_rows])) < 1e-12
    assert abs(avg.far95 - np.mean([r.far95 for r in maha_rows])) < 1e-12


def test_novel_class_needs_three_classes():
    cfg = _quick_config(synth=SynthConfig(num_classes=2, dim=4, per_class=20, seed=1))
    with pytest.raises(TooFewClasses):
        harness.run_novel_class(cfg, trials=2)


def test_checkpoint_save_load_round_trip(tmp_path, quick_run):
    cfg, dataset, _, ckpt = quick_run
    path = tmp_path / "ckpt.json"
    harness.save_checkpoint(ckpt, cfg, path)
    params, meta = harness.load_checkpoint(path)
    assert np.array_equal(params.softmax_weights, ckpt.params.softmax_weights)
    for (w_a, b_a), (w_b, b_b) in zip(params.layers, ckpt.params.layers):
        assert np.array_equal(w_a, w_b)
        assert np.array_equal(b_a, b_b)
    assert meta["seed"] == 1
    assert meta["loss_mode"] == "none"
    rebuilt = harness.rebuild_checkpoint(cfg, params, dataset, meta)
    assert rebuilt.detectors.keys() == ckpt.detectors.keys()


def test_checkpoint_rejects_wrong_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "ood-ckpt/9"}')
    with pytest.raises(FormatError):
        harness.load_checkpoint(path)


def _rows():
    rows = []
    for seed in (1, 2):
        for scorer in ("msp", "maha"):
            rows.append(
                EvalReport(
                    id_dataset="synth",
                    ood_dataset="shifted",
                    loss_mode="margin",
                    scorer=scorer,
                    auroc=0.9 + 0.02 * seed,
                    far95=0.1 * seed,
                    accuracy=0.95,
                    seed=seed,
                    n_id=10,
                    n_ood=10,
                )
            )
    return rows


def test_emit_reports_empty_rows_gives_header_only(tmp_path):
    paths = harness.emit_reports([], tmp_path)
    csv_path = [p for p in paths if p.suffix == ".csv"][0]
    lines = csv_path.read_text().strip().splitlines()
    assert lines == ["id_dataset,ood_dataset,loss_mode,scorer,auroc,far95,accuracy,seed"]


def test_emit_reports_rows_plus_averages(tmp_path):
    paths = harness.emit_reports(_rows(), tmp_path)
    csv_path = [p for p in paths if p.name == "report.csv"][0]
    lines = csv_path.read_text().strip().splitlines()
    assert len(lines) == 1 + 4 + 2  # header + rows + one avg row per scorer
    avg_lines = [line for line in lines if line.endswith(",avg")]
    assert len(avg_lines) == 2
    md_path = [p for p in paths if p.suffix == ".md"][0]
    assert "AUROC" in md_path.read_text()
    assert any(p.suffix == ".png" for p in paths)


def test_emit_reports_is_deterministic(tmp_path):
    first_dir = tmp_path / "a"
    second_dir = tmp_path / "b"
    harness.emit_reports(_rows(), first_dir)
    harness.emit_reports(_rows(), second_dir)
    assert (first_dir / "report.csv").read_bytes() == (second_dir / "report.csv").read_bytes()
    assert (first_dir / "report.md").read_bytes() == (second_dir / "report.md").read_bytes()


def test_emit_reports_projection_files(tmp_path):
    points = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]])
    paths = harness.emit_reports(_rows(), tmp_path, projection=(points, ["id", "id", "ood"]))
    names = {p.name for p in paths}
    assert "report-projection.csv" in names
    assert "report-projection.png" in names
    proj_lines = (tmp_path / "report-projection.csv").read_text().strip().splitlines()
    assert proj_lines[0] == "x,y,group"
    assert len(proj_lines) == 4


def test_maha_fit_on_train_val_flag():
    cfg = _quick_config(maha_fit_on="train_val", epochs=2, scorers=["maha"])
    dataset, ood = harness.load_run_data(cfg)
    ckpt = harness.train_run(cfg, seed=6, dataset=dataset)
    reports = harness.evaluate_pair(ckpt, dataset, ood)
    assert reports[0].scorer == "maha"
    assert 0.0 <= reports[0].auroc <= 1.0
