"""Single-node network: data types, activation, forward pass and losses.

The network has no hidden layer and one output node, so a model is a bias
plus one weight per input feature, pushed through a strictly increasing
activation.  Two losses are provided: the sum of squared residuals and the
uniform (max-abs) loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

QUASICONVEX_SLACK = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    target: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled feature vectors with a stable sample order.

    ``features`` is an ``(N, n)`` array and ``targets`` has length ``N``.
    ``source_index`` maps each row back to its position in the dataset it
    was derived from (the identity for freshly read data), so subsets keep
    track of which original samples they hold.
    """

    features: np.ndarray
    targets: np.ndarray
    class_labels: tuple[float, ...] = ()
    source_index: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        x = np.array(self.features, dtype=float, ndmin=2, copy=True)
        y = np.array(self.targets, dtype=float, ndmin=1, copy=True)
        if x.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ValueError(
                f"{y.shape[0]} targets for {x.shape[0]} feature rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("features and targets must be finite")
        labels = self.class_labels
        if not labels:
            labels = tuple(dict.fromkeys(float(v) for v in y))
        else:
            labels = tuple(float(v) for v in labels)
        if self.source_index is None:
            idx = np.arange(x.shape[0])
        else:
            idx = np.array(self.source_index, dtype=np.int64, copy=True)
            if idx.shape != (x.shape[0],):
                raise ValueError("source_index must have one entry per sample")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "targets", _frozen(y))
        object.__setattr__(self, "class_labels", labels)
        object.__setattr__(self, "source_index", _frozen(idx))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], n: int | None = None,
                     **kwargs) -> "Dataset":
        if not samples:
            if n is None:
                raise ValueError("feature dimension needed for an empty dataset")
            return cls(np.empty((0, n)), np.empty(0), **kwargs)
        x = np.array([np.asarray(s.features, dtype=float) for s in samples])
        y = np.array([s.target for s in samples], dtype=float)
        return cls(x, y, **kwargs)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    @property
    def samples(self) -> list[Sample]:
        return [Sample(self.features[i], float(self.targets[i]))
                for i in range(len(self))]

    def take(self, rows: Sequence[int] | np.ndarray, name: str = "") -> "Dataset":
        """Subset by row position; class labels and source rows are kept."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.targets[rows],
                       class_labels=self.class_labels,
                       source_index=self.source_index[rows],
                       name=name or self.name)


@dataclass(frozen=True, eq=False)
class WeightVector:
    bias: float
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, ndmin=1, copy=True)
        if w.ndim != 1:
            raise ValueError("weights must be a vector")
        b = float(self.bias)
        if not (math.isfinite(b) and np.all(np.isfinite(w))):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def zeros(cls, n: int) -> "WeightVector":
        return cls(0.0, np.zeros(n))

    @classmethod
    def from_array(cls, z: np.ndarray) -> "WeightVector":
        """Build from a stacked ``(bias, w1, ..., wn)`` array."""
        z = np.asarray(z, dtype=float)
        return cls(z[0], z[1:])

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.bias], self.weights))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, WeightVector):
            return NotImplemented
        return (self.bias == other.bias
                and np.array_equal(self.weights, other.weights))

    def __repr__(self):
        return f"WeightVector(bias={self.bias!r}, weights={self.weights!r})"


class Activation:
    """A strictly increasing activation with an explicit inverse.

    Subclasses implement the elementwise ``value``, ``inverse`` and
    ``derivative`` maps on numpy arrays.
    """

    def value(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class LeakyReLU(Activation):
    """``alpha * t`` for ``t <= 0`` and ``t`` for ``t > 0``.

    ``alpha`` must lie strictly between 0 and 1; ``alpha = 0`` (plain ReLU)
    has no inverse and is refused.
    """

    alpha: float = 0.01

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, t, self.alpha * t)

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s > 0, s, s / self.alpha)

    def derivative(self, t):
        # slope 1 at the kink
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, 1.0, self.alpha)


def _check_finite(v, what):
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} must be finite")


def activate(a: Activation, t):
    """Apply the activation; scalars in, scalars out."""
    _check_finite(t, "activation input")
    out = a.value(t)
    return float(out) if np.ndim(out) == 0 else out


def activate_inverse(a: Activation, s):
    _check_finite(s, "inverse activation input")
    out = a.inverse(s)
    return float(out) if np.ndim(out) == 0 else out


def pre_activation(w: WeightVector, x: np.ndarray) -> np.ndarray | float:
    """Affine part ``bias + <weights, x>`` for one vector or a row stack."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != w.n:
        raise ValueError(
            f"input has {x.shape[-1]} features, weights expect {w.n}")
    return w.bias + x @ w.weights


def forward(w: WeightVector, a: Activation, x) -> float | np.ndarray:
    out = a.value(pre_activation(w, x))
    return float(out) if np.ndim(out) == 0 else out


def residuals(w: WeightVector, a: Activation, z: Dataset) -> np.ndarray:
    """Per-sample ``target - output``."""
    if len(z) == 0:
        raise ValueError("dataset is empty")
    return z.targets - a.value(pre_activation(w, z.features))


def uniform_loss(w: WeightVector, a: Activation, z: Dataset) -> float:
    return float(np.max(np.abs(residuals(w, a, z))))


def uniform_loss_maxrep(w: WeightVector, a: Activation, z: Dataset) -> float:
    """Uniform loss written as the largest of ``y - phi`` and ``phi - y``.

    Each term is quasiaffine in the weights, which is what makes the loss
    quasiconvex.  Numerically identical to :func:`uniform_loss`.
    """
    if len(z) == 0:
        raise ValueError("dataset is empty")
    phi = a.value(pre_activation(w, z.features))
    return float(np.max(np.maximum(z.targets - phi, phi - z.targets)))


def mse_loss(w: WeightVector, a: Activation, z: Dataset) -> float:
    """Sum (not mean) of squared residuals."""
    r = residuals(w, a, z)
    return float(r @ r)


def is_quasiconvex_on_segment(f: Callable[[WeightVector], float],
                              w_a: WeightVector, w_b: WeightVector,
                              num_lambda: int = 101) -> bool:
    """Sample ``f(lam*w_a + (1-lam)*w_b) <= max(f(w_a), f(w_b))``.

    The inequality is checked at ``num_lambda`` evenly spaced points of
    ``[0, 1]`` with a slack of ``1e-9 * (1 + |max|)``.
    """
    if w_a.n != w_b.n:
        raise ValueError("segment endpoints differ in dimension")
    if num_lambda < 2:
        raise ValueError("num_lambda must be at least 2")
    za, zb = w_a.as_array(), w_b.as_array()
    top = max(f(w_a), f(w_b))
    slack = QUASICONVEX_SLACK * (1.0 + abs(top))
    for lam in np.linspace(0.0, 1.0, num_lambda):
        if f(WeightVector.from_array(lam * za + (1.0 - lam) * zb)) > top + slack:
            return False
    return True
