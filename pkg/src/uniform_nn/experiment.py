"""Evaluation and the end-to-end experiment runner.

An experiment reads (or generates) a training source and a test set, cuts
a training subset, optionally removes outliers, trains the uniform arm
and/or the least-squares arm, and scores both with nearest-label
classification.  Random subsets are repeated with seeds
``seed, seed + 1, ...`` and their accuracies averaged.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .baseline import GdConfig, train_mse
from .bisection import BisectionConfig, train_uniform
from .data import OutlierSpec, SubsetSpec, atomic_write, build_subset, \
    generate_synthetic, read_ucr, remove_outliers
from .model import Activation, Dataset, LeakyReLU, WeightVector, forward, \
    mse_loss, uniform_loss

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

ARMS = ("uniform", "mse")
ARM_TITLES = {"uniform": "Uniform approximation", "mse": "Least squares (GD)"}


# -- classification ---------------------------------------------------------

def classify(w: WeightVector, a: Activation, x, class_labels: Sequence[float]) -> float:
    """Label nearest to the network output; ties go to the smaller label."""
    if len(class_labels) == 0:
        raise ValueError("class_labels is empty")
    labels = np.sort(np.asarray(class_labels, dtype=float))
    out = forward(w, a, x)
    return float(labels[int(np.argmin(np.abs(out - labels)))])


def classify_many(w: WeightVector, a: Activation, x: np.ndarray,
                  class_labels: Sequence[float]) -> np.ndarray:
    labels = np.sort(np.asarray(class_labels, dtype=float))
    out = np.atleast_1d(forward(w, a, x))
    return labels[np.argmin(np.abs(out[:, None] - labels[None, :]), axis=1)]


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts indexed by (actual, predicted), labels in ascending order."""

    labels: tuple[float, ...]
    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64, copy=True)
        k = len(self.labels)
        if c.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        if list(self.labels) != sorted(self.labels):
            raise ValueError("labels must be ascending")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "labels", tuple(float(v) for v in self.labels))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.counts, other.counts)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": self.counts.tolist(),
                "accuracy": self.accuracy}


def evaluate(w: WeightVector, a: Activation, test: Dataset,
             class_labels: Sequence[float] | None = None) -> ConfusionMatrix:
    """Confusion matrix of nearest-label predictions on ``test``.

    ``class_labels`` defaults to the test set's own labels.  A test label
    outside ``class_labels`` is an error.
    """
    if len(test) == 0:
        raise ValueError("test set is empty")
    labels = tuple(sorted(set(float(v) for v in
                              (class_labels if class_labels is not None
                               else test.class_labels))))
    unknown = set(test.targets.tolist()) - set(labels)
    if unknown:
        raise ValueError(f"test labels {sorted(unknown)} not among {list(labels)}")
    index = {lab: i for i, lab in enumerate(labels)}
    pred = classify_many(w, a, test.features, labels)
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for actual, p in zip(test.targets, pred):
        counts[index[float(actual)], index[float(p)]] += 1
    return ConfusionMatrix(labels, counts)


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    train_counts: Mapping[float, int]
    test_counts: Mapping[float, int]
    separation: float = 1.0
    noise: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment depends on; seeds included.

    ``train_path``/``test_path`` are the files as distributed.  With
    ``swap`` (implied by subset mode ``swap``) the training subset is cut
    from the second file and the first becomes the test set.  When
    ``synthetic`` is set the paths are ignored.
    """

    name: str
    train_path: str = ""
    test_path: str = ""
    synthetic: SyntheticSpec | None = None
    subset: SubsetSpec = field(default_factory=SubsetSpec)
    swap: bool = False
    repetitions: int = 1
    outliers: OutlierSpec | None = None
    arms: tuple[str, ...] = ARMS
    bisection: BisectionConfig = field(default_factory=BisectionConfig)
    gd: GdConfig = field(default_factory=GdConfig)
    workers: int = 1

    def __post_init__(self):
        bad = set(self.arms) - set(ARMS)
        if bad or not self.arms:
            raise ValueError(f"arms must be a nonempty subset of {ARMS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.synthetic is None and not (self.train_path and self.test_path):
            raise ValueError("either data paths or a synthetic section is required")
        if self.subset.mode == "swap":
            object.__setattr__(self, "swap", True)

    def echo(self) -> dict:
        d = asdict(self)
        d["arms"] = list(self.arms)
        del d["workers"]  # scheduling only; results do not depend on it
        return _jsonable(d)


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _label_map(table) -> dict[float, int] | list[int]:
    if isinstance(table, Mapping):
        return {float(k): int(v) for k, v in table.items()}
    return [int(v) for v in table]


def config_from_dict(d: Mapping[str, Any], base_dir: str = "",
                     data_root: str | None = None) -> ExperimentConfig:
    """Build a config from a parsed TOML tree.

    Relative data paths resolve against ``data_root`` when given, else
    against ``base_dir``.
    """
    d = dict(d)
    data = dict(d.get("data", {}))
    root = data_root if data_root is not None else base_dir

    def resolve(p):
        p = os.path.expandvars(os.path.expanduser(p)) if p else ""
        return p if not p or os.path.isabs(p) else os.path.join(root, p)

    synthetic = None
    if "synthetic" in data:
        s = dict(data["synthetic"])
        synthetic = SyntheticSpec(
            n=int(s["n"]), train_counts=_label_map(s["train_counts"]),
            test_counts=_label_map(s["test_counts"]),
            separation=float(s.get("separation", 1.0)),
            noise=float(s.get("noise", 0.1)), seed=int(s.get("seed", 0)))
    sub = dict(d.get("subset", {}))
    subset = SubsetSpec(mode=sub.get("mode", "full"),
                        counts=_label_map(sub.get("counts", {})),
                        total=int(sub.get("total", 0)),
                        seed=int(sub.get("seed", 0)))
    outliers = None
    if "outliers" in d:
        o = dict(d["outliers"])
        outliers = OutlierSpec(method=o.get("method", "tolerance"),
                               tolerance=float(o.get("tolerance", 0.0)),
                               k=int(o.get("k", 0)),
                               allow_all=bool(o.get("allow_all", False)))
    u = dict(d.get("uniform", {}))
    m = dict(d.get("mse", {}))
    arms = tuple(a for a, sec in (("uniform", u), ("mse", m))
                 if sec.get("enabled", True))
    alpha = float(d.get("alpha", 0.01))
    lr = m.get("learning_rate")
    return ExperimentConfig(
        name=str(d.get("name", "experiment")),
        train_path=resolve(data.get("train", "")),
        test_path=resolve(data.get("test", "")),
        synthetic=synthetic, subset=subset, swap=bool(sub.get("swap", False)),
        repetitions=int(sub.get("repetitions", 1)),
        outliers=outliers, arms=arms,
        bisection=BisectionConfig(epsilon=float(u.get("epsilon", 1e-5)),
                                  max_iterations=int(u.get("max_iterations", 200)),
                                  alpha=alpha),
        gd=GdConfig(learning_rate=None if lr is None else float(lr),
                    epochs=int(m.get("epochs", 500)),
                    init_seed=int(m.get("init_seed", 0)),
                    init_scale=float(m.get("init_scale", 0.01)),
                    standardize=bool(m.get("standardize", False))),
        workers=int(d.get("workers", 1)))


def load_config(path: str, data_root: str | None = None) -> ExperimentConfig:
    with open(path, "rb") as fh:
        tree = tomllib.load(fh)
    return config_from_dict(tree, base_dir=os.getcwd(), data_root=data_root)


# -- running ----------------------------------------------------------------

def load_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Training source and test set, with swap applied."""
    if cfg.synthetic is not None:
        s = cfg.synthetic
        total = {float(k): int(v) + int(s.test_counts.get(k, 0))
                 for k, v in s.train_counts.items()}
        for k, v in s.test_counts.items():
            total.setdefault(float(k), int(v))
        full = generate_synthetic(s.n, total, s.separation, s.noise, s.seed)
        train_rows, test_rows = [], []
        for lab in full.class_labels:
            idx = np.flatnonzero(full.targets == lab)
            k = int(s.train_counts.get(lab, 0))
            train_rows.extend(idx[:k])
            test_rows.extend(idx[k:])
        return (full.take(np.sort(train_rows), "synthetic-train"),
                full.take(np.sort(test_rows), "synthetic-test"))
    first, second = read_ucr(cfg.train_path), read_ucr(cfg.test_path)
    if cfg.swap:
        return second, first
    return first, second


def _run_arm(arm: str, train: Dataset, test: Dataset, labels, cfg: ExperimentConfig,
             rep: int) -> tuple[dict, float]:
    a = LeakyReLU(cfg.bisection.alpha)
    t0 = time.perf_counter()
    out: dict[str, Any] = {}
    if arm == "uniform":
        rep_ = train_uniform(train, cfg.bisection)
        w = rep_.weights
        feasible = [s for s in rep_.trace if s.feasible]
        out.update(lower=rep_.lower, upper=rep_.upper,
                   iterations=rep_.iterations, converged=rep_.converged,
                   pivots=sum(s.pivots for s in rep_.trace),
                   max_violation=max((s.violation for s in feasible), default=0.0),
                   witness_verified=all(s.violation <= s.tolerance for s in feasible),
                   train_loss=uniform_loss(w, a, train))
    else:
        gd = cfg.gd
        if cfg.repetitions > 1:
            gd = GdConfig(gd.learning_rate, gd.epochs, gd.init_seed + rep,
                          gd.init_scale, gd.standardize)
        w = train_mse(train, gd, a)
        out.update(converged=True, train_loss=mse_loss(w, a, train))
    elapsed = time.perf_counter() - t0
    cm = evaluate(w, a, test, labels)
    out = {"accuracy": cm.accuracy, "confusion": cm.to_dict(), **out,
           "weights": {"bias": w.bias, "norm": float(np.linalg.norm(w.weights))}}
    return out, elapsed


def _run_repetition(args) -> tuple[dict, dict]:
    cfg, source, test, labels, rep = args
    spec = cfg.subset
    if spec.mode == "random_k":
        spec = SubsetSpec(spec.mode, spec.counts, spec.total, spec.seed + rep)
    train = build_subset(source, spec)
    record: dict[str, Any] = {"repetition": rep, "subset_seed": spec.seed,
                              "train_size": len(train),
                              "train_class_counts": _class_counts(train, labels),
                              "train_rows": train.source_index.tolist()}
    timing: dict[str, float] = {}
    if cfg.outliers is not None:
        t0 = time.perf_counter()
        kept, removed, rep_ = remove_outliers(train, cfg.bisection, cfg.outliers)
        timing["outliers"] = time.perf_counter() - t0
        record["outliers"] = {
            "method": cfg.outliers.method, "removed": len(removed),
            "kept": len(kept), "threshold": rep_.threshold,
            "max_deviation": float(rep_.deviations.max()),
            "removed_rows": removed.source_index.tolist()}
        train = kept
    record["arms"] = {}
    for arm in cfg.arms:
        record["arms"][arm], timing[arm] = _run_arm(arm, train, test, labels, cfg, rep)
    return record, timing


def _class_counts(z: Dataset, labels) -> dict[str, int]:
    return {_label_key(lab): int(np.sum(z.targets == lab)) for lab in labels}


def _label_key(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass(frozen=True)
class ExperimentReport:
    data: dict
    timing: dict

    @property
    def converged(self) -> bool:
        return all(arm["converged"] for r in self.data["repetitions"]
                   for arm in r["arms"].values())

    def mean_accuracy(self, arm: str) -> float:
        return self.data["summary"][arm]["mean_accuracy"]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run every repetition and both (or one) arm; deterministic in ``cfg``.

    Wall times go into ``report.timing`` rather than ``report.data`` so the
    data part is reproducible byte for byte.
    """
    source, test = load_data(cfg)
    labels = tuple(sorted(set(source.class_labels) | set(test.class_labels)))
    reps = cfg.repetitions if cfg.subset.mode == "random_k" else 1
    jobs = [(cfg, source, test, labels, r) for r in range(reps)]
    if cfg.workers > 1 and reps > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_repetition, jobs))
    else:
        results = [_run_repetition(j) for j in jobs]
    records = [r for r, _ in results]
    summary = {}
    for arm in cfg.arms:
        accs = [r["arms"][arm]["accuracy"] for r in records]
        summary[arm] = {"accuracies": accs, "mean_accuracy": float(np.mean(accs))}
    data = {"config": cfg.echo(), "class_labels": list(labels),
            "source_size": len(source), "test_size": len(test),
            "repetitions": records, "summary": summary}
    timing = {"repetitions": [t for _, t in results]}
    return ExperimentReport(data, timing)


# -- rendering --------------------------------------------------------------

def render_table(report: ExperimentReport) -> str:
    d = report.data
    lines = [f"Experiment: {d['config']['name']}",
             f"Training source: {d['source_size']} samples, "
             f"test set: {d['test_size']} samples"]
    reps = d["repetitions"]
    if len(reps) == 1:
        r = reps[0]
        per_class = ", ".join(f"class {k}: {v}" for k, v in r["train_class_counts"].items())
        lines.append(f"Training set: {r['train_size']} samples ({per_class})")
        if "outliers" in r:
            o = r["outliers"]
            lines.append(f"Outliers removed: {o['removed']} ({o['method']}), "
                         f"kept {o['kept']}")
    lines.append("")
    width = max(len(ARM_TITLES[a]) for a in d["summary"])
    for arm, s in d["summary"].items():
        title = ARM_TITLES[arm].ljust(width)
        if len(reps) == 1:
            cm = reps[0]["arms"][arm]["confusion"]
            rows = cm["counts"]
            cell = max(len(str(v)) for row in rows for v in row)
            lines.append(f"{title}  {100 * s['mean_accuracy']:6.2f}%  "
                         + " ".join(str(v).rjust(cell) for v in rows[0]))
            for row in rows[1:]:
                lines.append(" " * (width + 11)
                             + " ".join(str(v).rjust(cell) for v in row))
        else:
            per = ", ".join(f"{100 * v:.2f}" for v in s["accuracies"])
            lines.append(f"{title}  {100 * s['mean_accuracy']:6.2f}%  "
                         f"(mean of {len(reps)}: {per})")
    return "\n".join(lines) + "\n"


def write_report(report: ExperimentReport, path: str) -> tuple[str, str, str]:
    """Write ``<path>`` (JSON), ``<stem>.txt`` and ``<stem>.timing.json``."""
    stem = path[:-5] if path.endswith(".json") else path
    json_path = stem + ".json"
    atomic_write(json_path, report.to_json())
    atomic_write(stem + ".txt", render_table(report))
    atomic_write(stem + ".timing.json",
                 json.dumps(report.timing, indent=2, sort_keys=True) + "\n")
    return json_path, stem + ".txt", stem + ".timing.json"
