"""Full-batch gradient descent on the sum-of-squares loss.

Same architecture as the uniform arm: one output node, no hidden layer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import Activation, Dataset, LeakyReLU, WeightVector, pre_activation

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class GdConfig:
    """Gradient-descent settings.

    ``learning_rate=None`` picks ``1 / (2 * lambda_max(A^T A))`` with
    ``A = [1 | X]``, the reciprocal of the curvature bound of the loss;
    this step never diverged on the test corpus, unlike any fixed value.
    ``standardize`` trains on z-scored features and maps the weights back.
    """

    learning_rate: float | None = None
    epochs: int = 500
    init_seed: int = 0
    init_scale: float = 0.01
    standardize: bool = False

    def __post_init__(self):
        if self.learning_rate is not None and not (
                math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError("learning_rate must be positive")
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise ValueError("epochs must be a nonnegative integer")
        if not (math.isfinite(self.init_scale) and self.init_scale >= 0):
            raise ValueError("init_scale must be nonnegative")


def _gradient(z: np.ndarray, a: Activation, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    u = z[0] + x @ z[1:]
    r = y - a.value(u)
    g = -2.0 * r * a.derivative(u)
    return np.concatenate(([g.sum()], x.T @ g))


def mse_gradient(w: WeightVector, a: Activation, z: Dataset) -> WeightVector:
    """Gradient of the summed squared residuals, shaped like the weights.

    The activation's derivative is taken as 1 at a zero pre-activation.
    """
    if len(z) == 0:
        raise ValueError("dataset is empty")
    pre_activation(w, z.features[:1])  # dimension check
    return WeightVector.from_array(_gradient(w.as_array(), a, z.features, z.targets))


def default_learning_rate(x: np.ndarray) -> float:
    aug = np.hstack((np.ones((x.shape[0], 1)), x))
    lam = float(np.linalg.eigvalsh(aug.T @ aug if aug.shape[0] >= aug.shape[1]
                                   else aug @ aug.T)[-1])
    return 1.0 / (2.0 * lam) if lam > 0 else 1.0


def train_mse(z: Dataset, cfg: GdConfig = GdConfig(),
              a: Activation = LeakyReLU(), history: list | None = None) -> WeightVector:
    """Train by ``cfg.epochs`` full-batch gradient steps.

    Weights start uniform in ``[-init_scale, init_scale]`` from
    ``np.random.default_rng(init_seed)``.  If ``history`` is given, the loss
    before each step and after the last is appended to it.

    Raises
    ------
    DivergenceError
        When the loss grows past ``1e6`` times its initial value.
    """
    if len(z) == 0:
        raise ValueError("dataset is empty")
    x, y = z.features, z.targets
    if cfg.standardize:
        mu = x.mean(axis=0)
        sd = x.std(axis=0)
        sd[sd == 0] = 1.0
        x = (x - mu) / sd
    rng = np.random.default_rng(cfg.init_seed)
    w = rng.uniform(-cfg.init_scale, cfg.init_scale, size=z.n + 1)
    lr = cfg.learning_rate if cfg.learning_rate is not None else default_learning_rate(x)

    def loss(v):
        r = y - a.value(v[0] + x @ v[1:])
        return float(r @ r)

    start = loss(w)
    limit = DIVERGENCE_FACTOR * max(start, np.finfo(float).tiny)
    current = start
    for epoch in range(cfg.epochs):
        if history is not None:
            history.append(current)
        w = w - lr * _gradient(w, a, x, y)
        current = loss(w)
        if not math.isfinite(current) or current > limit:
            raise DivergenceError(
                f"loss {current:.3g} at epoch {epoch + 1} exceeds "
                f"{DIVERGENCE_FACTOR:g} x initial loss {start:.3g} "
                f"(learning rate {lr:.3g})")
    if history is not None:
        history.append(current)
    if cfg.standardize:
        weights = w[1:] / sd
        w = np.concatenate(([w[0] - weights @ mu], weights))
    log.debug("mse training: %d epochs, loss %.6g -> %.6g", cfg.epochs, start, current)
    return WeightVector.from_array(w)


__all__ = ["GdConfig", "DivergenceError", "mse_gradient", "train_mse",
           "default_learning_rate"]
