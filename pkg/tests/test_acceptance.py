"""Acceptance criteria, one test per criterion.

Each test prints a single [PASS] line on success (visible with `pytest -s`
or in captured output); a failing criterion fails its test.  The desk
benchmark fixture (4 Gaussian classes with a displaced OOD cluster, 5 seeds,
modes none/margin) is shared across the directional criteria.
"""

import time

import numpy as np
import pytest

from oodkit import encoder, harness, losses, metrics, scorers
from oodkit.config import RunConfig
from oodkit.data import SynthConfig, gen_synthetic, save_embeddings
from oodkit.losses import LossConfig

import oracles

GRAD_TOL = 1e-4
MAHA_TOL = 1e-9
AFFINE_TOL = 1e-6
BENCHMARK_SEEDS = (1, 2, 3, 4, 5)


def _pass(message):
    print(f"[PASS] {message}")


# ---------------------------------------------------------------------------
# gradient suite
# ---------------------------------------------------------------------------


def _random_instance(rng, metric=None):
    """A random small net + batch, resampled away from hinge/L1 kinks."""
    for _ in range(100):
        input_dim = int(rng.integers(2, 6))
        rep_dim = int(rng.integers(2, 9))
        hidden = [int(rng.integers(2, 9))]
        num_classes = int(rng.integers(2, 5))
        batch = int(rng.integers(2, 7))
        params = encoder.init_params(input_dim, hidden, rep_dim, num_classes, seed=int(rng.integers(0, 2**31)))
        xs = [rng.normal(size=input_dim) for _ in range(batch)]
        labels = [int(rng.integers(0, num_classes)) for _ in range(batch)]
        if metric is None:
            return params, xs, labels, None
        records = [encoder.forward(params, x) for x in xs]
        reps = [r.rep for r in records]
        try:
            margin = oracles.brute_adaptive_margin(reps, labels, metric)
        except Exception:
            margin = None
        if margin is None:
            margin = 0.0
        clean = True
        for i in range(batch):
            for j in range(batch):
                if i == j:
                    continue
                if labels[i] != labels[j] and abs(margin - oracles._metric_distance(reps[i], reps[j], metric)) < 1e-3:
                    clean = False
                if metric == "l1" and float(np.min(np.abs(reps[i] - reps[j]))) < 1e-4:
                    clean = False
        if clean:
            return params, xs, labels, margin
    raise AssertionError("could not sample a kink-free instance")


def _end_to_end_check(rng, mode, metric="l2"):
    params, xs, labels, margin = _random_instance(rng, metric if mode == "margin" else None)
    weight = 2.0

    def loss_fn(p):
        records = [encoder.forward(p, x) for x in xs]
        ce = oracles.direct_cross_entropy([r.logits for r in records], labels)
        if mode == "none":
            return ce
        if mode == "scl":
            return ce + weight * oracles.direct_scl([r.unit_rep for r in records], labels, 0.3)
        return ce + weight * oracles.direct_margin([r.rep for r in records], labels, metric, margin=margin)

    records = [encoder.forward(params, x) for x in xs]
    cfg = LossConfig(mode=mode, temperature=0.3, weight=weight, metric=metric, margin_grad="stop")
    report = losses.batch_loss(records, labels, cfg)
    analytic = encoder.backward(
        params,
        records,
        grad_logits=report.grad_logits,
        grad_rep=report.grad_rep or None,
        grad_unit_rep=report.grad_unit_rep or None,
    )
    numeric = oracles.fd_param_gradients(loss_fn, params, step=1e-5)
    return oracles.normalized_max_error(oracles.param_tensors(analytic), numeric)


def test_gradient_suite():
    rng = np.random.default_rng(1001)
    started = time.monotonic()
    settings = [("none", "l2"), ("scl", "l2"), ("margin", "l2"), ("margin", "l1"), ("margin", "cosine")]
    instances = 0
    worst = 0.0
    for mode, metric in settings:
        for _ in range(5):
            err = _end_to_end_check(rng, mode, metric)
            worst = max(worst, err)
            assert err < GRAD_TOL, f"{mode}/{metric}: max relative error {err:.3e} >= {GRAD_TOL}"
            instances += 1
    elapsed = time.monotonic() - started
    assert instances >= 20
    assert elapsed < 30.0, f"gradient suite took {elapsed:.1f}s"
    _pass(f"gradient suite: {instances} instances across ce/scl/margin(l2,l1,cosine), worst rel err {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# covariance-distance oracle
# ---------------------------------------------------------------------------


def test_mahalanobis_oracle():
    rng = np.random.default_rng(1003)
    worst = 0.0
    for _ in range(50):
        num_classes = int(rng.integers(2, 5))
        dim = int(rng.integers(2, 6))
        n = int(rng.integers(num_classes * 2, 51))
        labels = list(range(num_classes)) + [int(rng.integers(0, num_classes)) for _ in range(n - num_classes)]
        reps = [rng.normal(size=dim) for _ in range(n)]
        queries = [rng.normal(size=dim) * float(rng.uniform(0.5, 4.0)) for _ in range(6)]
        det = scorers.fit_maha(reps, labels)
        ours = np.array([scorers.score_maha(det, q) for q in queries])
        brute = np.array(oracles.brute_maha_scores(reps, labels, queries))
        worst = max(worst, float(np.max(np.abs(ours - brute))))
        assert np.max(np.abs(ours - brute)) < MAHA_TOL
    _pass(f"mahalanobis oracle: 50 instances, worst deviation {worst:.2e} < {MAHA_TOL}")


# ---------------------------------------------------------------------------
# metric oracle
# ---------------------------------------------------------------------------


def test_metric_oracle():
    rng = np.random.default_rng(1005)
    for _ in range(100):
        n_id = int(rng.integers(1, 201))
        n_ood = int(rng.integers(1, 201))
        id_scores = [float(v) for v in rng.integers(0, 10, size=n_id)]
        ood_scores = [float(v) for v in rng.integers(0, 10, size=n_ood)]
        assert metrics.auroc(id_scores, ood_scores) == oracles.pair_count_auroc(id_scores, ood_scores)
        assert metrics.far95(id_scores, ood_scores) == oracles.sweep_far95(id_scores, ood_scores)
    _pass("metric oracle: auroc and far95 match brute-force pair counts / threshold sweeps exactly on 100 tied samples")


# ---------------------------------------------------------------------------
# desk benchmark (shared by the directional criteria)
# ---------------------------------------------------------------------------


def _benchmark_config(mode, seed):
    return RunConfig(
        synth=SynthConfig(num_classes=4, dim=8, per_class=100, std=1.0, separation=6.0, displacement=12.0, seed=11),
        loss=LossConfig(mode=mode, weight=2.0),
        hidden_dims=[24],
        rep_dim=8,
        lr=3e-3,
        epochs=15,
        batch_size=16,
        scorers=["msp", "energy", "maha", "cosine"],
        seeds=[seed],
    )


@pytest.fixture(scope="module")
def desk_benchmark():
    started = time.monotonic()
    results = {}
    dataset_cache = {}
    for mode in ("none", "margin"):
        for seed in BENCHMARK_SEEDS:
            cfg = _benchmark_config(mode, seed)
            if "data" not in dataset_cache:
                dataset_cache["data"] = harness.load_run_data(cfg)
            dataset, ood = dataset_cache["data"]
            ckpt = harness.train_run(cfg, seed=seed, dataset=dataset)
            reports = {r.scorer: r for r in harness.evaluate_pair(ckpt, dataset, ood, ood_name="displaced")}
            results[(mode, seed)] = {"val_accuracy": ckpt.val_accuracy, "reports": reports}
    elapsed = time.monotonic() - started
    assert elapsed < 180.0, f"benchmark took {elapsed:.1f}s, budget is 3 minutes"
    return results, elapsed


def _mean(results, mode, scorer, field):
    values = [getattr(results[(mode, seed)]["reports"][scorer], field) for seed in BENCHMARK_SEEDS]
    return float(np.mean(values))


def test_directional_maha_beats_msp(desk_benchmark):
    results, elapsed = desk_benchmark
    maha = _mean(results, "none", "maha", "auroc")
    msp = _mean(results, "none", "msp", "auroc")
    assert maha >= msp
    _pass(f"directional (a): mean Maha AUROC {maha:.4f} >= mean MSP AUROC {msp:.4f} (benchmark {elapsed:.0f}s)")


def test_directional_margin_reduces_maha_far95(desk_benchmark):
    results, _ = desk_benchmark
    with_margin = _mean(results, "margin", "maha", "far95")
    baseline = _mean(results, "none", "maha", "far95")
    assert with_margin <= baseline
    _pass(f"directional (b): margin+Maha mean FAR95 {with_margin:.4f} <= baseline Maha mean FAR95 {baseline:.4f}")


def test_directional_margin_maha_auroc_threshold(desk_benchmark):
    results, _ = desk_benchmark
    value = _mean(results, "margin", "maha", "auroc")
    assert value >= 0.95
    _pass(f"directional (c): margin+Maha mean AUROC {value:.4f} >= 0.95")


def test_non_interference_accuracy(desk_benchmark):
    results, _ = desk_benchmark
    for seed in BENCHMARK_SEEDS:
        baseline = results[("none", seed)]["val_accuracy"]
        contrastive = results[("margin", seed)]["val_accuracy"]
        assert abs(contrastive - baseline) <= 0.02, f"seed {seed}: {contrastive} vs {baseline}"
    _pass("non-interference: margin (weight 2) validation accuracy within 2 points of the baseline on every seed")


# ---------------------------------------------------------------------------
# novel-class sanity
# ---------------------------------------------------------------------------


def test_novel_class_harder_than_displaced(desk_benchmark, tmp_path):
    results, _ = desk_benchmark
    displaced_auroc = _mean(results, "margin", "maha", "auroc")

    # 4 clusters where class 3 sits one std away from class 2's mean
    dataset, _ = gen_synthetic(SynthConfig(num_classes=4, dim=8, per_class=100, std=1.0, separation=6.0, displacement=12.0, seed=23))
    shift = np.zeros(8)
    shift[2] = 6.0
    shift[3] = -6.0 + 1.0
    for ex in dataset.examples:
        if ex.label == 3:
            ex.vector = ex.vector + shift
    path = tmp_path / "overlap.jsonl"
    save_embeddings(dataset, path)

    cfg = RunConfig(
        source="embed",
        embed_id_path=str(path),
        loss=LossConfig(mode="margin", weight=2.0),
        hidden_dims=[24],
        rep_dim=8,
        lr=3e-3,
        epochs=15,
        batch_size=16,
        scorers=["maha"],
        seeds=[1],
    )
    result = harness.run_novel_class(cfg, trials=4)
    novel_auroc = [r for r in result.averages if r.scorer == "maha"][0].auroc
    assert novel_auroc < displaced_auroc
    _pass(f"novel-class sanity: same-corpus AUROC {novel_auroc:.4f} < displaced-cluster AUROC {displaced_auroc:.4f}")


# ---------------------------------------------------------------------------
# scorer invariants
# ---------------------------------------------------------------------------


def test_scorer_invariants():
    rng = np.random.default_rng(1007)

    # Maha affine invariance after refitting under a random full-rank map
    reps = [rng.normal(size=4) for _ in range(60)]
    labels = [i % 3 for i in range(60)]
    queries = [rng.normal(size=4) * 2.0 for _ in range(10)]
    det = scorers.fit_maha(reps, labels)
    base = np.array([scorers.score_maha(det, q) for q in queries])
    transform = rng.normal(size=(4, 4)) + 2.0 * np.eye(4)
    assert abs(np.linalg.det(transform)) > 1e-6
    det_mapped = scorers.fit_maha([transform @ r for r in reps], labels)
    mapped = np.array([scorers.score_maha(det_mapped, transform @ q) for q in queries])
    affine_dev = float(np.max(np.abs(base - mapped)))
    assert affine_dev < AFFINE_TOL

    # AUROC invariance under strictly increasing transforms, exactly
    id_scores = [float(v) for v in rng.integers(0, 8, size=50)]
    ood_scores = [float(v) for v in rng.integers(0, 8, size=40)]
    base_auroc = metrics.auroc(id_scores, ood_scores)
    assert metrics.auroc(np.exp(id_scores), np.exp(ood_scores)) == base_auroc
    assert metrics.auroc(5.0 * np.asarray(id_scores) - 2.0, 5.0 * np.asarray(ood_scores) - 2.0) == base_auroc

    # Sign convention: a far-away point outscores every validation point on
    # all four scorers.
    dim, num_classes = 6, 3
    means = [4.0 * np.eye(dim)[j] for j in range(num_classes)]
    val_reps, val_labels = [], []
    for j, mean in enumerate(means):
        for _ in range(15):
            val_reps.append(mean + 0.05 * rng.normal(size=dim))
            val_labels.append(j)
    head = scorers.ClassifierHead(weights=np.stack(means), bias=np.zeros(num_classes))
    detectors = {
        "msp": scorers.fit_msp(head),
        "energy": scorers.fit_energy(head),
        "maha": scorers.maha_artifact(scorers.fit_maha(val_reps, val_labels)),
        "cosine": scorers.cosine_artifact(scorers.fit_cosine(val_reps), num_classes),
    }
    far_point = 50.0 * np.eye(dim)[4]  # orthogonal to every class mean
    for kind, artifact in detectors.items():
        far_score = artifact.score(far_point)
        val_scores = [artifact.score(rep) for rep in val_reps]
        assert far_score > max(val_scores), f"{kind}: far point {far_score} vs max val {max(val_scores)}"

    _pass(f"scorer invariants: affine deviation {affine_dev:.2e} < {AFFINE_TOL}, AUROC transform-invariant exactly, sign convention holds for all four scorers")
