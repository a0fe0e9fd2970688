"""Two-sided linear feasibility systems and a dense phase-1 simplex solver.

A system is a list of rows ``lower <= bias + <coefficients, w> <= upper``
in the free variables ``(bias, w)``.  :func:`solve_feasibility` decides
whether the system has a solution and returns one when it does.

Solver layout
-------------
Every finite side of every row becomes an inequality ``g . z <= h`` with
its own slack.  The free variables enter the basis first, one per
linearly independent row, chosen by complete pivoting; a free basic never
leaves, so its row drops out of every later ratio test.  Those pivots are
applied in block form: they depend only on the coefficients, so a
:class:`ConstraintMatrix` computes them once and reuses them for any
bounds.  What remains is a slack-only system on which phase 1 (explicit
artificials, Bland's rule) decides feasibility.  The witness is recovered
from the pivot block and polished by iterative refinement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import Activation, Dataset, WeightVector

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-8
PIVOT_TOL = 1e-9
COST_TOL = 1e-9
REFINE_STEPS = 3


class LinearSolverError(RuntimeError):
    """The solver could not produce a trustworthy answer."""


@dataclass(frozen=True, eq=False)
class IntervalConstraint:
    lower: float
    upper: float
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float, ndmin=1, copy=True)
        if not np.all(np.isfinite(c)):
            raise ValueError("constraint coefficients must be finite")
        lo, hi = float(self.lower), float(self.upper)
        if np.isnan(lo) or np.isnan(hi) or lo == np.inf or hi == -np.inf:
            raise ValueError(f"invalid bounds [{self.lower}, {self.upper}]")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def value(self, w: WeightVector) -> float:
        return w.bias + float(self.coefficients @ w.weights)


@dataclass(frozen=True)
class SolverStats:
    rows: int = 0
    columns: int = 0
    pivots: int = 0
    degenerate_pivots: int = 0
    phase1_objective: float = 0.0

    @property
    def iterations(self) -> int:
        return self.pivots


@dataclass(frozen=True)
class FeasibilityResult:
    status: str
    witness: WeightVector | None = None
    solver_stats: SolverStats = field(default_factory=SolverStats)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def feasibility_tolerance(lower, upper) -> float:
    """``1e-8 * (1 + largest finite |bound|)``."""
    b = np.concatenate((np.ravel(lower), np.ravel(upper)))
    b = np.abs(b[np.isfinite(b)])
    return FEASIBILITY_TOL * (1.0 + (b.max() if b.size else 0.0))


def build_constraints(z: Dataset, a: Activation, L: float) -> list[IntervalConstraint]:
    """Rows of the sublevel-set system ``max_i |y_i - phi_i(w)| <= L``.

    With the activation inverted, sample ``i`` contributes
    ``inv(y_i - L) <= bias + <x_i, w> <= inv(y_i + L)``.
    """
    lower, upper = constraint_bounds(z, a, L)
    return [IntervalConstraint(lo, hi, x)
            for lo, hi, x in zip(lower, upper, z.features)]


def constraint_bounds(z: Dataset, a: Activation, L: float) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`build_constraints`: per-sample (lower, upper)."""
    if not np.isfinite(L) or L < 0:
        raise ValueError(f"level must be a finite nonnegative number, got {L}")
    if len(z) == 0:
        raise ValueError("dataset is empty")
    return a.inverse(z.targets - L), a.inverse(z.targets + L)


def max_violation(w: WeightVector, lower, upper, coefficients) -> float:
    """Largest amount by which ``w`` breaks any row (0 when all hold)."""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape[0] == 0:
        return 0.0
    t = w.bias + coefficients @ w.weights
    gap = np.maximum(np.asarray(lower) - t, t - np.asarray(upper))
    return float(max(0.0, np.max(gap)))


def stack_constraints(constraints: Sequence[IntervalConstraint], n: int):
    if not constraints:
        return np.empty(0), np.empty(0), np.empty((0, n))
    for c in constraints:
        if c.coefficients.shape[0] != n:
            raise ValueError(
                f"constraint has {c.coefficients.shape[0]} coefficients, expected {n}")
    lower = np.array([c.lower for c in constraints])
    upper = np.array([c.upper for c in constraints])
    coeffs = np.array([c.coefficients for c in constraints])
    return lower, upper, coeffs


def solve_feasibility(constraints: Sequence[IntervalConstraint], n: int) -> FeasibilityResult:
    if n < 0:
        raise ValueError("n must be nonnegative")
    return solve_system(*stack_constraints(constraints, n))


def solve_system(lower, upper, coefficients) -> FeasibilityResult:
    """Array entry point: ``coefficients`` is ``(rows, n)``, bias implicit."""
    return ConstraintMatrix(coefficients).solve(lower, upper)


def complete_pivoting(a: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Rank-revealing elimination order of ``a`` by complete pivoting.

    Returns the pivot rows and pivot columns, in pivot order.  Elimination
    stops once the largest remaining entry is at most ``tol``.
    """
    w = np.array(a, dtype=float, copy=True)
    rows, cols = w.shape
    rperm, cperm = np.arange(rows), np.arange(cols)
    rank = 0
    for s in range(min(rows, cols)):
        block = np.abs(w[s:, s:])
        i, j = divmod(int(np.argmax(block)), block.shape[1])
        if block[i, j] <= tol:
            break
        i += s
        j += s
        w[[s, i]] = w[[i, s]]
        rperm[[s, i]] = rperm[[i, s]]
        w[:, [s, j]] = w[:, [j, s]]
        cperm[[s, j]] = cperm[[j, s]]
        mult = w[s + 1:, s] / w[s, s]
        w[s + 1:, s + 1:] -= np.outer(mult, w[s, s + 1:])
        w[s + 1:, s] = 0.0
        rank += 1
    return rperm[:rank], cperm[:rank]


class ConstraintMatrix:
    """The coefficient side of an interval system, prepared for solving.

    Free-variable pivots and their block inverse depend only on the
    coefficients and on which bound sides are finite, so they are cached
    per finiteness pattern; :meth:`solve` can then be called for many
    bound vectors (the bisection levels) at the cost of phase 1 alone.
    """

    def __init__(self, coefficients):
        c = np.asarray(coefficients, dtype=float)
        if c.ndim != 2:
            raise ValueError("coefficients must be a 2-d array")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        self.n = c.shape[1]
        self.a = np.hstack((np.ones((c.shape[0], 1)), c))
        self._cache: dict[bytes, _Pivoted] = {}

    def solve(self, lower, upper) -> FeasibilityResult:
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != (self.a.shape[0],) or upper.shape != lower.shape:
            raise ValueError("bounds and coefficient rows disagree in shape")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)) \
                or np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ValueError("bounds must be finite or the matching infinity")
        has_lo, has_hi = np.isfinite(lower), np.isfinite(upper)
        if not (has_lo.any() or has_hi.any()):
            return FeasibilityResult("feasible", WeightVector.zeros(self.n))
        key = np.concatenate((has_lo, has_hi)).tobytes()
        piv = self._cache.get(key)
        if piv is None:
            piv = self._cache[key] = _Pivoted(self.a, has_lo, has_hi)
        tol = feasibility_tolerance(lower, upper)
        z, stats = piv.phase_one(lower, upper, tol)
        if z is None:
            return FeasibilityResult("infeasible", None, stats)
        w = WeightVector.from_array(z)
        viol = max_violation(w, lower, upper, self.a[:, 1:])
        if viol > tol:
            raise LinearSolverError(
                f"phase 1 reports feasible but the witness violates a row "
                f"by {viol:.3e} (tolerance {tol:.3e})")
        return FeasibilityResult("feasible", w, stats)


class _Pivoted:
    """Inequality rows of one finiteness pattern after the free pivots."""

    def __init__(self, a: np.ndarray, has_lo: np.ndarray, has_hi: np.ndarray):
        # inequality rows ordered (sample, lower-then-upper); that order
        # doubles as the slack index used by Bland's rule
        sample, side = [], []
        for i in range(a.shape[0]):
            if has_lo[i]:
                sample.append(i)
                side.append(-1.0)
            if has_hi[i]:
                sample.append(i)
                side.append(1.0)
        self.sample = np.array(sample)
        self.side = np.array(side)
        self.k = a.shape[1]
        m = self.m = self.sample.size
        g = a[self.sample] * self.side[:, None]

        used = np.unique(self.sample)
        scale = max(1.0, float(np.max(np.abs(a[used]))))
        prow, self.pcol = complete_pivoting(a[used], PIVOT_TOL * scale)
        psample = used[prow]
        # one inequality row per pivot sample carries its free basic
        first = {}
        for r in range(m - 1, -1, -1):
            first[self.sample[r]] = r
        self.prow = np.array([first[s] for s in psample], dtype=int)
        mask = np.ones(m, dtype=bool)
        mask[self.prow] = False
        self.qrow = np.flatnonzero(mask)

        self.g_pc = g[np.ix_(self.prow, self.pcol)]
        g_qc = g[np.ix_(self.qrow, self.pcol)]
        # q-rows expressed through the pivot rows: g_q = wq @ g_p
        if self.prow.size:
            self.wq = np.linalg.solve(self.g_pc.T, g_qc.T).T
        else:
            self.wq = np.zeros((self.qrow.size, 0))
        self.pivots = int(self.prow.size)

    def phase_one(self, lower, upper, tol):
        m, prow, qrow = self.m, self.prow, self.qrow
        h = np.where(self.side < 0, -lower[self.sample], upper[self.sample])
        nq = qrow.size
        # tableau on the non-pivot rows: slack columns (m) | rhs
        t = np.zeros((nq + 1, m + 1))
        t[:nq, prow] = -self.wq
        t[np.arange(nq), qrow] = 1.0
        t[:nq, -1] = h[qrow] - self.wq @ h[prow]
        # own slack stays basic where the rhs allows; artificial of the
        # i-th q-row gets id i - nq so artificials sort below every slack
        basis = np.where(t[:nq, -1] >= 0, qrow, np.arange(nq) - nq)
        art = basis < 0
        t[:nq][art] *= -1.0
        t[nq] = -t[:nq][art].sum(axis=0)

        pivots = self.pivots
        degenerate = 0
        max_pivots = 50 * m + 1000
        while True:
            picked = None
            for col in np.flatnonzero(t[nq, :m] < -COST_TOL):
                cand = np.flatnonzero(t[:nq, col] > PIVOT_TOL)
                if cand.size:
                    picked = col, cand
                    break
            if picked is None:
                break
            col, cand = picked
            ratios = np.maximum(t[cand, -1], 0.0) / t[cand, col]
            best = ratios.min()
            ties = cand[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            row = ties[np.argmin(basis[ties])]
            if best <= PIVOT_TOL:
                degenerate += 1
            _pivot(t, row, col)
            basis[row] = col
            pivots += 1
            if pivots > max_pivots:
                raise LinearSolverError(f"phase 1 exceeded {max_pivots} pivots")

        objective = float(np.maximum(t[:nq, -1][basis < 0], 0.0).sum())
        stats = SolverStats(rows=m, columns=2 * self.k + m, pivots=pivots,
                            degenerate_pivots=degenerate,
                            phase1_objective=objective)
        if objective > tol:
            return None, stats

        slack = np.zeros(m)
        real = basis >= 0
        slack[basis[real]] = np.maximum(t[:nq, -1][real], 0.0)
        z = np.zeros(self.k)
        if prow.size:
            rhs = h[prow] - slack[prow]
            z[self.pcol] = _refined_solve(self.g_pc, rhs)
        return z, stats


def _refined_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` with residuals accumulated in extended precision."""
    x = np.linalg.solve(a, b)
    a_ext = a.astype(np.longdouble)
    b_ext = b.astype(np.longdouble)
    for _ in range(REFINE_STEPS):
        r = (b_ext - a_ext @ x.astype(np.longdouble)).astype(float)
        x = x + np.linalg.solve(a, r)
    return x


def _pivot(t: np.ndarray, row: int, col: int) -> None:
    t[row] /= t[row, col]
    factor = t[:, col].copy()
    factor[row] = 0.0
    nz = np.flatnonzero(factor)
    if nz.size:
        t[nz] -= np.outer(factor[nz], t[row])
