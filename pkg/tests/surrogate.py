"""Stand-in data with the shape of the hand-outline archive files.

Rows are smoothed random walks (outline-like curves, strongly correlated
neighbouring features) with a small class-dependent bump.  Only the shape
and class sizes match the real files; accuracies on it mean nothing.
"""

import numpy as np

from uniform_nn.model import Dataset

N_FEATURES = 2709
TRAIN_COUNTS = {1.0: 362, 2.0: 638}
TEST_COUNTS = {1.0: 133, 2.0: 237}


def outline_like(counts, seed, n=N_FEATURES):
    rng = np.random.default_rng(seed)
    kernel = np.exp(-0.5 * (np.arange(-60, 61) / 20.0) ** 2)
    kernel /= kernel.sum()
    base = np.cumsum(rng.normal(size=n)) * 0.01
    bump = 0.05 * np.sin(np.linspace(0.0, 3 * np.pi, n))
    xs, ys = [], []
    for label, m in counts.items():
        walk = np.cumsum(rng.normal(size=(m, n)), axis=1) * 0.01
        smooth = np.array([np.convolve(r, kernel, mode="same") for r in walk])
        xs.append(smooth + base + (label - 1.5) * bump + 0.5)
        ys.append(np.full(m, label))
    x, y = np.vstack(xs), np.concatenate(ys)
    perm = rng.permutation(y.size)
    return Dataset(x[perm], y[perm])
