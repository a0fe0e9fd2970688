"""Reading UCR-format files, building training subsets, removing outliers.

A UCR file holds one record per line: the class label, then the feature
values, separated by tabs or commas and without a header.
"""

from __future__ import annotations

import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bisection import BisectionConfig, BisectionReport, train_uniform
from .model import Dataset, LeakyReLU, forward

log = logging.getLogger(__name__)

SUBSET_MODES = ("full", "swap", "first_k_per_class", "random_k")
OUTLIER_METHODS = ("tolerance", "top_k")


class DataError(ValueError):
    """Malformed input data or an impossible subset request."""


class DegenerateRemovalError(RuntimeError):
    """Outlier removal would discard every sample."""


# -- file I/O ---------------------------------------------------------------

def _detect_delimiter(line: str) -> str | None:
    if "\t" in line:
        return "\t"
    if "," in line:
        return ","
    return None


def read_ucr(path: str | os.PathLike, name: str = "") -> Dataset:
    """Parse a UCR text file.

    The delimiter is detected from the first non-blank line: tab if present,
    else comma, else runs of whitespace.  Class labels are kept in order of
    first appearance.

    Raises
    ------
    DataError
        Empty file, ragged rows, or non-numeric fields, with the 1-based
        line number.
    """
    path = os.fspath(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    delim = None
    width = None
    labels, rows = [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if width is None:
            delim = _detect_delimiter(line)
            log.info("%s: delimiter %r", path, delim or "whitespace")
        fields = [f.strip() for f in line.split(delim)]
        try:
            values = [float(f) for f in fields]
        except ValueError:
            bad = next(f for f in fields if not _is_float(f))
            raise DataError(f"{path}:{lineno}: non-numeric field {bad!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"{path}:{lineno}: non-finite value")
        if width is None:
            if len(values) < 2:
                raise DataError(f"{path}:{lineno}: record has no features")
            width = len(values)
        elif len(values) != width:
            raise DataError(f"{path}:{lineno}: expected {width} fields, "
                            f"found {len(values)}")
        labels.append(values[0])
        rows.append(values[1:])
    if not rows:
        raise DataError(f"{path}:1: file contains no records")
    return Dataset(np.array(rows), np.array(labels),
                   name=name or os.path.basename(path))


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _fmt(v: float) -> str:
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)


def write_ucr(z: Dataset, path: str | os.PathLike, delimiter: str = "\t") -> None:
    """Write ``z`` in UCR format, atomically, with round-trip exact floats."""
    lines = []
    for y, x in zip(z.targets, z.features):
        lines.append(delimiter.join([_fmt(float(y))] + [repr(float(v)) for v in x]))
    atomic_write(path, "\n".join(lines) + "\n")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- subsets ----------------------------------------------------------------

@dataclass(frozen=True)
class SubsetSpec:
    """How to cut a training set from a dataset.

    ``counts`` maps a class label to the number of leading samples taken
    from that class.  A sequence is also accepted and is matched to the
    labels in ascending order.  ``swap`` keeps the data as is; exchanging
    the training and test files is done by the experiment runner.
    """

    mode: str = "full"
    counts: Mapping[float, int] | Sequence[int] = field(default_factory=dict)
    total: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in SUBSET_MODES:
            raise ValueError(f"unknown subset mode {self.mode!r}")

    def counts_for(self, z: Dataset) -> dict[float, int]:
        c = self.counts
        if isinstance(c, Mapping):
            return {float(k): int(v) for k, v in c.items()}
        labels = sorted(z.class_labels)
        if len(c) != len(labels):
            raise DataError(f"{len(c)} counts given for {len(labels)} classes")
        return {lab: int(v) for lab, v in zip(labels, c)}


def build_subset(z: Dataset, spec: SubsetSpec) -> Dataset:
    if spec.mode in ("full", "swap"):
        return z
    if spec.mode == "first_k_per_class":
        counts = spec.counts_for(z)
        chosen = []
        for label, k in counts.items():
            idx = np.flatnonzero(z.targets == label)
            if k < 0 or k > idx.size:
                raise DataError(f"class {label:g} has {idx.size} samples, "
                                f"{k} requested")
            chosen.append(idx[:k])
        rows = np.sort(np.concatenate(chosen)) if chosen else np.empty(0, int)
        return z.take(rows, name=f"{z.name}[first_k]")
    if not 0 <= spec.total <= len(z):
        raise DataError(f"cannot draw {spec.total} of {len(z)} samples")
    rng = np.random.default_rng(spec.seed)
    rows = np.sort(rng.choice(len(z), size=spec.total, replace=False))
    return z.take(rows, name=f"{z.name}[random_{spec.total}@{spec.seed}]")


# -- outliers ---------------------------------------------------------------

@dataclass(frozen=True)
class OutlierSpec:
    method: str = "tolerance"
    tolerance: float = 0.0
    k: int = 0
    allow_all: bool = False

    def __post_init__(self):
        if self.method not in OUTLIER_METHODS:
            raise ValueError(f"unknown outlier method {self.method!r}")
        if not (math.isfinite(self.tolerance) and self.tolerance >= 0):
            raise ValueError("tolerance must be nonnegative")
        if self.k < 0:
            raise ValueError("k must be nonnegative")


@dataclass(frozen=True)
class OutlierReport:
    deviations: np.ndarray
    removed_rows: np.ndarray
    threshold: float
    training: BisectionReport


def deviation_profile(z: Dataset, report: BisectionReport, alpha: float) -> np.ndarray:
    return np.abs(z.targets - forward(report.weights, LeakyReLU(alpha), z.features))


def remove_outliers(z: Dataset, cfg: BisectionConfig, spec: OutlierSpec
                    ) -> tuple[Dataset, Dataset, OutlierReport]:
    """Fit by bisection, then drop the samples of largest absolute deviation.

    ``tolerance`` mode drops every sample with ``d_i >= max(d) - tolerance``;
    ``top_k`` drops the ``k`` largest, lower row index first among ties.

    Raises
    ------
    DegenerateRemovalError
        If tolerance mode would remove all samples and ``allow_all`` is off.
    DataError
        If ``k`` exceeds the dataset size.
    """
    if len(z) == 0:
        raise ValueError("dataset is empty")
    if spec.method == "top_k" and spec.k > len(z):
        raise DataError(f"k={spec.k} exceeds dataset size {len(z)}")
    fit = train_uniform(z, cfg)
    d = deviation_profile(z, fit, cfg.alpha)
    if spec.method == "tolerance":
        threshold = float(d.max()) - spec.tolerance
        mask = d >= threshold
        if mask.all() and not spec.allow_all:
            raise DegenerateRemovalError(
                f"all {len(z)} samples lie within {spec.tolerance:g} of the "
                f"maximal deviation {d.max():.3g}; refusing to remove everything")
        removed = np.flatnonzero(mask)
    else:
        order = np.lexsort((np.arange(len(z)), -d))
        removed = np.sort(order[:spec.k])
        threshold = float(d[order[spec.k - 1]]) if spec.k else math.inf
    kept = np.setdiff1d(np.arange(len(z)), removed)
    report = OutlierReport(d, removed, threshold, fit)
    log.info("outlier removal (%s): %d of %d removed", spec.method,
             removed.size, len(z))
    return (z.take(kept, name=f"{z.name}[kept]"),
            z.take(removed, name=f"{z.name}[removed]"), report)


# -- synthetic data ---------------------------------------------------------

def generate_synthetic(n: int, n_per_class: Mapping[float, int], separation: float,
                       noise: float, seed: int) -> Dataset:
    """Gaussian clusters, one per class, placed along a random unit direction.

    Class ``j`` (in ascending label order) is centred at
    ``j * separation * u``; samples add isotropic noise of std ``noise``.
    Rows are shuffled so classes interleave.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not n_per_class:
        raise ValueError("at least one class is required")
    if any(int(c) < 1 for c in n_per_class.values()):
        raise ValueError("every class needs at least one sample")
    if not (math.isfinite(separation) and separation >= 0):
        raise ValueError("separation must be nonnegative")
    if not (math.isfinite(noise) and noise >= 0):
        raise ValueError("noise must be nonnegative")
    if separation == 0 and noise == 0:
        raise ValueError("separation and noise cannot both be zero")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    u /= np.linalg.norm(u)
    labels = sorted(float(k) for k in n_per_class)
    counts = {float(k): int(v) for k, v in n_per_class.items()}
    xs, ys = [], []
    for j, lab in enumerate(labels):
        m = counts[lab]
        xs.append(j * separation * u + noise * rng.standard_normal((m, n)))
        ys.append(np.full(m, lab))
    x = np.vstack(xs)
    y = np.concatenate(ys)
    perm = rng.permutation(y.size)
    return Dataset(x[perm], y[perm], class_labels=tuple(labels), name="synthetic")
