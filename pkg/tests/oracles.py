"""Independent reference computations used by the tests.

Nothing here calls into the package's solver; scipy's HiGHS and plain
numpy enumeration are the references.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog


def leaky(t, alpha):
    return np.where(t > 0, t, alpha * t)


def loss_on_points(params: np.ndarray, x: np.ndarray, y: np.ndarray, alpha: float):
    """Uniform loss for a stack of parameter rows ``(bias, w1, ..., wn)``."""
    u = params[:, :1] + params[:, 1:] @ x.T
    return np.max(np.abs(y[None, :] - leaky(u, alpha)), axis=1)


def grid_optimum(x, y, alpha=0.01, box=3.0, step=1e-3, coarse=0.1,
                 beam=24, seeds=(), chunk=400_000):
    """Grid minimum of the uniform loss over ``[-box, box]^(n+1)``.

    A full grid at ``step`` is too large in three dimensions, so the search
    runs coarse-to-fine: the whole box at ``coarse``, then windows of a few
    cells around the ``beam`` best points at each finer step down to
    ``step``.  ``seeds`` adds parameter vectors whose surrounding lattice
    cells are also searched at the finest step.  Every evaluated point lies
    on the ``step`` lattice, so the result is an upper bound on the
    full-grid minimum.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    dim = x.shape[1] + 1
    ticks = int(round(box / step))
    levels = []
    s = coarse
    while s > step * 1.0001:
        levels.append(s)
        s /= 5.0
    levels.append(step)

    def window(center, half, k):
        axes = [np.arange(max(-ticks, c - half * k), min(ticks, c + half * k) + 1, k)
                for c in center]
        return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dim)

    def scored(points):
        points = np.unique(points, axis=0)
        vals = np.concatenate([loss_on_points(points[i:i + chunk] * step, x, y, alpha)
                               for i in range(0, len(points), chunk)])
        return points, vals

    pts, vals = scored(window(np.zeros(dim, np.int64), ticks, int(round(levels[0] / step))))
    for s in levels[1:]:
        k = int(round(s / step))
        top = pts[np.argsort(vals, kind="stable")[:beam]]
        pts, vals = scored(np.vstack([window(c, 6, k) for c in top]))
    extra = [np.clip(np.round(np.asarray(z, float) / step).astype(np.int64), -ticks, ticks)
             for z in seeds]
    if extra:
        p2, v2 = scored(np.vstack([window(c, 3, 1) for c in extra]))
        pts, vals = np.vstack((pts, p2)), np.concatenate((vals, v2))
    j = int(np.argmin(vals))
    return float(vals[j]), pts[j] * step


def exact_optimum(x, y, alpha=0.01, box=None, return_argmin=False):
    """Exact minimum of the uniform loss, optionally inside a box.

    Every pattern of active Leaky-ReLU branches turns the problem into an
    LP in ``(bias, w, t)``; the minimum over all patterns is the optimum.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    N, n = x.shape
    k = n + 2
    a = np.hstack((np.ones((N, 1)), x))
    best, arg = np.inf, None
    bounds = [(-box, box) if box is not None else (None, None)] * (n + 1) + [(0, None)]
    c = np.zeros(k)
    c[-1] = 1.0
    for pattern in itertools.product((0, 1), repeat=N):
        slope = np.where(np.array(pattern) == 1, 1.0, alpha)
        rows, rhs = [], []
        for i in range(N):
            s = slope[i] * a[i]
            # |y - s.z| <= t
            rows.append(np.concatenate((s, [-1.0])))
            rhs.append(y[i])
            rows.append(np.concatenate((-s, [-1.0])))
            rhs.append(-y[i])
            # branch sign: u >= 0 on the positive branch, u <= 0 otherwise
            sign = -1.0 if pattern[i] else 1.0
            rows.append(np.concatenate((sign * a[i], [0.0])))
            rhs.append(0.0)
        res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds,
                      method="highs")
        if res.status == 0 and res.fun < best:
            best, arg = float(res.fun), res.x[:-1]
    return (best, arg) if return_argmin else best


def vertex_feasible(lower, upper, coeffs, tol=1e-9):
    """Brute-force feasibility of ``lower <= b + C w <= upper``.

    If the system is feasible, some solution makes ``rank`` linearly
    independent rows tight (or any point works when rank is 0), so it
    suffices to try every choice of tight rows and bound sides.
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    a = np.hstack((np.ones((len(lower), 1)), np.asarray(coeffs, float)))
    m, k = a.shape
    if m == 0:
        return True

    def ok(z):
        t = a @ z
        return np.all(t >= lower - tol) and np.all(t <= upper + tol)

    if ok(np.zeros(k)):
        return True
    rank = np.linalg.matrix_rank(a)
    for rows in itertools.combinations(range(m), rank):
        sub = a[list(rows)]
        if np.linalg.matrix_rank(sub) < rank:
            continue
        for sides in itertools.product((0, 1), repeat=rank):
            rhs = np.array([lower[r] if s == 0 else upper[r]
                            for r, s in zip(rows, sides)])
            if not np.all(np.isfinite(rhs)):
                continue
            z = np.linalg.lstsq(sub, rhs, rcond=None)[0]
            if ok(z):
                return True
    return False


def highs_feasible(lower, upper, coeffs):
    a = np.hstack((np.ones((len(lower), 1)), np.asarray(coeffs, float)))
    k = a.shape[1]
    rows, rhs = [], []
    for i in range(len(lower)):
        if np.isfinite(upper[i]):
            rows.append(a[i])
            rhs.append(upper[i])
        if np.isfinite(lower[i]):
            rows.append(-a[i])
            rhs.append(-lower[i])
    if not rows:
        return True
    res = linprog(np.zeros(k), A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=[(None, None)] * k, method="highs")
    return res.status == 0
