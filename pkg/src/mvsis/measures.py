"""Uniform-weight empirical measures on the line and their Wasserstein distances."""
from __future__ import annotations

import itertools
import math

import numpy as np


class MeasureError(ValueError):
    pass


class EmpiricalMeasure:
    """Sorted atoms, each carrying mass 1/n."""

    __slots__ = ("samples",)

    def __init__(self, samples):
        a = np.sort(np.asarray(samples, dtype=float).ravel())
        if a.size == 0:
            raise MeasureError("empirical measure needs at least one atom")
        if not np.all(np.isfinite(a)):
            raise MeasureError("atoms must be finite")
        a.setflags(write=False)
        self.samples = a

    def __len__(self):
        return self.samples.size

    def __repr__(self):
        return f"EmpiricalMeasure(n={len(self)})"


def exact_mean(values):
    """Correctly rounded mean; independent of the order of the values."""
    v = np.asarray(values, dtype=float).ravel()
    return math.fsum(v.tolist()) / v.size


def from_samples(values) -> EmpiricalMeasure:
    return EmpiricalMeasure(values)


def clip_pushforward(mu: EmpiricalMeasure, y: float) -> EmpiricalMeasure:
    """Image of mu under x -> min(max(x, 0), y)."""
    if y < 0:
        raise MeasureError(f"clip level must be nonnegative, got {y}")
    return EmpiricalMeasure(np.clip(mu.samples, 0.0, y))


def moment(mu: EmpiricalMeasure, p: float = 1.0, signed: bool = False) -> float:
    """(1/n) sum |x|^p, or the plain mean when ``signed`` (p must be 1 then)."""
    if p < 1:
        raise MeasureError("p must be >= 1")
    if signed:
        if p != 1:
            raise MeasureError("signed moments are only defined for p = 1")
        return exact_mean(mu.samples)
    return float(np.mean(np.abs(mu.samples) ** p))


def _quantile_pairs(x, y):
    """Both quantile functions on the common refinement of their jump points."""
    n, m = x.size, y.size
    u = np.union1d(np.arange(n + 1) / n, np.arange(m + 1) / m)
    w = np.diff(u)
    mid = 0.5 * (u[:-1] + u[1:])
    ix = np.minimum((mid * n).astype(np.int64), n - 1)
    iy = np.minimum((mid * m).astype(np.int64), m - 1)
    return x[ix], y[iy], w


def wasserstein(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float = 1.0,
                refine: bool = False) -> float:
    """W_p via the monotone coupling of sorted atoms.

    Different atom counts need ``refine=True``; both quantile functions are then
    compared on the merged grid of their jump points, which is exact.
    """
    if p < 1:
        raise MeasureError("p must be >= 1")
    x, y = mu.samples, nu.samples
    if x.size == y.size:
        return float(np.mean(np.abs(x - y) ** p) ** (1.0 / p))
    if not refine:
        raise MeasureError(f"sample counts differ ({x.size} vs {y.size}); pass refine=True")
    a, b, w = _quantile_pairs(x, y)
    return float(np.sum(w * np.abs(a - b) ** p) ** (1.0 / p))


def wasserstein_oracle(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float = 1.0) -> float:
    """Exhaustive search over all pairings; only for tiny equal-size samples."""
    n = len(mu)
    if len(nu) != n:
        raise MeasureError("oracle needs equal sample counts")
    if n > 8:
        raise MeasureError("oracle limited to n <= 8")
    x, y = mu.samples.tolist(), nu.samples.tolist()
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(abs(x[i] - y[j]) ** p for i, j in enumerate(perm)) / n
        best = min(best, cost)
    return best ** (1.0 / p)
