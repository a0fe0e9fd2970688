"""Minimise the uniform loss by bisection on its optimal value.

Each midpoint ``L`` of the bracket ``[lower, upper]`` is decided by a linear
feasibility query: is there a weight vector whose uniform loss is at most
``L``?  Feasible midpoints become the new upper bound and supply the
current witness; infeasible ones become the new lower bound.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .feasibility import ConstraintMatrix, constraint_bounds, max_violation, \
    feasibility_tolerance
from .model import Activation, Dataset, LeakyReLU, WeightVector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BisectionConfig:
    epsilon: float = 1e-5
    max_iterations: int = 200
    alpha: float = 0.01

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")

    @property
    def activation(self) -> LeakyReLU:
        return LeakyReLU(self.alpha)


@dataclass(frozen=True)
class TraceStep:
    """One bisection step.

    ``lower`` and ``upper`` are the bracket being bisected, ``level`` its
    midpoint.  For feasible steps ``violation`` is the witness's largest
    row violation, re-measured against the raw bounds, and ``tolerance``
    the threshold it had to meet.
    """

    level: float
    feasible: bool
    lower: float
    upper: float
    pivots: int = 0
    violation: float = 0.0
    tolerance: float = 0.0


@dataclass(frozen=True)
class BisectionReport:
    weights: WeightVector
    lower: float
    upper: float
    initial_upper: float
    iterations: int
    converged: bool
    trace: tuple[TraceStep, ...] = field(default_factory=tuple)

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


def initial_bounds(z: Dataset, a: Activation) -> tuple[float, float]:
    """``(0, max_i |y_i - sigma(0)|)``; zero weights attain the upper value."""
    if len(z) == 0:
        raise ValueError("dataset is empty")
    return 0.0, float(np.max(np.abs(z.targets - a.value(0.0))))


def required_iterations(u0: float, epsilon: float) -> int:
    """Halvings needed before a bracket of width ``u0`` drops below ``epsilon``."""
    k = 0
    width = u0
    while width >= epsilon:
        width /= 2.0
        k += 1
    return k


def train_uniform(z: Dataset, cfg: BisectionConfig = BisectionConfig()) -> BisectionReport:
    """Bisection training of the single-node network.

    Parameters
    ----------
    z : Dataset
        Training data; targets are used as regression values.
    cfg : BisectionConfig
        Stopping gap, iteration cap and activation slope.

    Returns
    -------
    BisectionReport
        Weights from the last feasible midpoint, the final bracket and a
        per-step trace.  ``converged`` is false when the cap ran out first.

    Raises
    ------
    ValueError
        If ``z`` is empty.
    LinearSolverError
        If a feasibility query cannot produce a witness that verifies.
    """
    a = cfg.activation
    lower, upper = initial_bounds(z, a)
    u0 = upper
    needed = required_iterations(u0, cfg.epsilon)
    if needed > cfg.max_iterations:
        warnings.warn(f"max_iterations={cfg.max_iterations} is below the "
                      f"{needed} halvings needed for epsilon={cfg.epsilon}",
                      RuntimeWarning, stacklevel=2)
    witness = WeightVector.zeros(z.n)
    system = ConstraintMatrix(z.features)
    trace = []
    k = 0
    while upper - lower >= cfg.epsilon and k < cfg.max_iterations:
        level = 0.5 * (lower + upper)
        lo, hi = constraint_bounds(z, a, level)
        result = system.solve(lo, hi)
        if result.feasible:
            tol = feasibility_tolerance(lo, hi)
            viol = max_violation(result.witness, lo, hi, z.features)
            trace.append(TraceStep(level, True, lower, upper,
                                   result.solver_stats.pivots, viol, tol))
            witness = result.witness
            upper = level
        else:
            trace.append(TraceStep(level, False, lower, upper,
                                   result.solver_stats.pivots))
            lower = level
        k += 1
        log.debug("step %d: L=%.9g feasible=%s", k, level, result.feasible)
    converged = upper - lower < cfg.epsilon
    if not converged:
        log.warning("bisection stopped after %d steps with gap %.3g",
                    k, upper - lower)
    return BisectionReport(witness, lower, upper, u0, k, converged, tuple(trace))
