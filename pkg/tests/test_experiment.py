import json
from dataclasses import replace

import numpy as np
import pytest

from uniform_nn.data import SubsetSpec, write_ucr
from uniform_nn.experiment import (ConfusionMatrix, ExperimentConfig, SyntheticSpec,
                                   classify, config_from_dict, evaluate, load_config,
                                   render_table, run_experiment, write_report)
from uniform_nn.model import Dataset, LeakyReLU, WeightVector

A = LeakyReLU(0.01)
IDENTITY = WeightVector(0.0, [1.0])


def synthetic_cfg(**kw):
    spec = SyntheticSpec(n=30, train_counts={1.0: 15, 2.0: 15},
                         test_counts={1.0: 40, 2.0: 40}, separation=6.0,
                         noise=0.2, seed=2)
    return ExperimentConfig(name="t", synthetic=spec, **kw)


@pytest.mark.parametrize("out, labels, expected", [
    (0.9, (0.0, 1.0), 1.0),
    (0.5, (0.0, 1.0), 0.0),
    (0.5, (1.0, 0.0), 0.0),
    (3.0, (1.0, 2.0), 2.0),
])
def test_classify_nearest_label(out, labels, expected):
    assert classify(IDENTITY, A, [out], labels) == expected


def test_classify_negative_output():
    # output sigma(-300) = -3
    assert classify(IDENTITY, A, [-300.0], (1.0, 2.0)) == 1.0


def test_classify_needs_labels():
    with pytest.raises(ValueError):
        classify(IDENTITY, A, [1.0], ())


def test_confusion_accuracy_rounding():
    cm = ConfusionMatrix((1.0, 2.0), [[108, 25], [13, 224]])
    assert cm.total == 370 and cm.correct == 332
    assert round(100 * cm.accuracy, 1) == 89.7


def test_confusion_validation():
    with pytest.raises(ValueError):
        ConfusionMatrix((1.0, 2.0), [[1, 2, 3]])
    with pytest.raises(ValueError):
        ConfusionMatrix((1.0, 2.0), [[1, -1], [0, 0]])
    with pytest.raises(ValueError):
        ConfusionMatrix((2.0, 1.0), [[1, 0], [0, 1]])


def test_evaluate_hand_built_set():
    # outputs equal the single feature; two samples sit on the wrong side
    x = [[0.1], [0.2], [0.8], [0.9], [1.1], [0.3]]
    y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
    cm = evaluate(IDENTITY, A, Dataset(x, y))
    assert cm.counts.tolist() == [[2, 1], [1, 2]]
    assert cm.total - cm.correct == 2


def test_evaluate_perfect_classifier():
    x = [[1.0], [2.0], [2.0], [1.0]]
    cm = evaluate(IDENTITY, A, Dataset(x, [1.0, 2.0, 2.0, 1.0]))
    assert cm.counts.tolist() == [[2, 0], [0, 2]] and cm.accuracy == 1.0


def test_evaluate_unknown_label():
    with pytest.raises(ValueError):
        evaluate(IDENTITY, A, Dataset([[1.0]], [3.0]), (1.0, 2.0))


def test_evaluate_uses_given_labels():
    # training labels may include a class absent from the test set
    cm = evaluate(IDENTITY, A, Dataset([[1.0], [1.1]], [1.0, 1.0]), (1.0, 2.0))
    assert cm.labels == (1.0, 2.0) and cm.counts.tolist() == [[2, 0], [0, 0]]


def test_synthetic_separable_is_perfect():
    rep = run_experiment(synthetic_cfg())
    for arm in ("uniform", "mse"):
        r = rep.data["repetitions"][0]["arms"][arm]
        assert r["accuracy"] == 1.0
        counts = np.array(r["confusion"]["counts"])
        assert r["accuracy"] == np.trace(counts) / counts.sum()


def test_repetitions_and_mean():
    cfg = synthetic_cfg(subset=SubsetSpec("random_k", total=10, seed=5), repetitions=10)
    rep = run_experiment(cfg)
    reps = rep.data["repetitions"]
    assert [r["subset_seed"] for r in reps] == list(range(5, 15))
    for arm in ("uniform", "mse"):
        accs = rep.data["summary"][arm]["accuracies"]
        assert len(accs) == 10
        assert rep.data["summary"][arm]["mean_accuracy"] == pytest.approx(np.mean(accs))
        assert accs == [r["arms"][arm]["accuracy"] for r in reps]


def test_report_bytes_deterministic(tmp_path):
    cfg = synthetic_cfg(subset=SubsetSpec("random_k", total=12, seed=1), repetitions=3)
    a = run_experiment(cfg).to_json()
    b = run_experiment(cfg).to_json()
    assert a == b
    pa, _, _ = write_report(run_experiment(cfg), str(tmp_path / "a.json"))
    pb, _, _ = write_report(run_experiment(cfg), str(tmp_path / "b.json"))
    assert open(pa, "rb").read() == open(pb, "rb").read()


def test_parallel_matches_serial():
    cfg = synthetic_cfg(subset=SubsetSpec("random_k", total=12, seed=1), repetitions=4)
    assert run_experiment(cfg).to_json() == run_experiment(replace(cfg, workers=2)).to_json()


def test_arm_isolation():
    cfg = synthetic_cfg(subset=SubsetSpec("random_k", total=12, seed=1), repetitions=3)
    both = run_experiment(cfg).data
    for arm in ("uniform", "mse"):
        alone = run_experiment(replace(cfg, arms=(arm,))).data
        assert [r["arms"][arm] for r in alone["repetitions"]] == \
            [r["arms"][arm] for r in both["repetitions"]]
        assert alone["summary"][arm] == both["summary"][arm]


def test_uniform_trace_witnesses_verified():
    rep = run_experiment(synthetic_cfg(arms=("uniform",)))
    u = rep.data["repetitions"][0]["arms"]["uniform"]
    assert u["converged"] and u["witness_verified"]


def test_swap_and_files(tmp_path):
    rng = np.random.default_rng(0)
    big = Dataset(rng.normal(size=(30, 4)), rng.choice([1.0, 2.0], 30))
    small = Dataset(rng.normal(size=(10, 4)), [1.0, 2.0] * 5)
    write_ucr(big, tmp_path / "TRAIN.tsv")
    write_ucr(small, tmp_path / "TEST.tsv")
    tree = {"name": "s", "data": {"train": "TRAIN.tsv", "test": "TEST.tsv"},
            "subset": {"mode": "swap"}}
    cfg = config_from_dict(tree, data_root=str(tmp_path))
    rep = run_experiment(cfg)
    assert (rep.data["source_size"], rep.data["test_size"]) == (10, 30)
    tree["subset"] = {"mode": "first_k_per_class", "counts": [2, 3], "swap": True}
    rep = run_experiment(config_from_dict(tree, data_root=str(tmp_path)))
    assert rep.data["repetitions"][0]["train_size"] == 5
    assert rep.data["test_size"] == 30


def test_outlier_step_recorded():
    tree = {"name": "o", "data": {"synthetic": {
                "n": 3, "separation": 2.0, "noise": 0.5, "seed": 4,
                "train_counts": {"1": 20, "2": 20}, "test_counts": {"1": 20, "2": 20}}},
            "outliers": {"method": "top_k", "k": 10}}
    rep = run_experiment(config_from_dict(tree))
    o = rep.data["repetitions"][0]["outliers"]
    assert (o["removed"], o["kept"]) == (10, 30)
    assert "Outliers removed: 10" in render_table(rep)


def test_shipped_configs_parse():
    import glob
    import os
    here = os.path.join(os.path.dirname(__file__), os.pardir, "experiments")
    paths = sorted(glob.glob(os.path.join(here, "*.toml")))
    assert len(paths) >= 12
    for p in paths:
        cfg = load_config(p)
        assert cfg.bisection.epsilon == 1e-5 and cfg.bisection.alpha == 0.01


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(name="x")
    with pytest.raises(ValueError):
        synthetic_cfg(arms=())
    with pytest.raises(ValueError):
        synthetic_cfg(repetitions=0)


def test_render_table_layout():
    rep = run_experiment(synthetic_cfg())
    text = render_table(rep)
    assert "Uniform approximation  100.00%" in text
    assert text.count("\n") >= 6
    json.loads(rep.to_json())
