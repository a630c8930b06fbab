"""Euler-Maruyama scheme for the interacting particle system.

Brownian increments come from a counter-based generator: the normals used at
step j are drawn from a Philox stream keyed by (seed, j), so the increment of
particle l, coordinate i, step j depends on nothing but (seed, l, i, j).
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import GeneralModel, MeasureStats, ModelError, _horner

_BRIDGE = 1 << 63
_MASK64 = (1 << 64) - 1


class NumericAbort(RuntimeError):
    def __init__(self, step, model_name=""):
        super().__init__(f"non-finite particle state at step {step} ({model_name})")
        self.step = step


@dataclass(frozen=True)
class Partition:
    times: np.ndarray
    h: float | None = None  # exact step of an equidistant grid

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or not np.all(np.diff(t) > 0):
            raise ValueError("partition must start at 0 and increase strictly")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @property
    def T(self):
        return float(self.times[-1])

    @property
    def steps(self):
        return self.times.size - 1

    @property
    def mesh(self):
        return self.h if self.h is not None else float(np.max(np.diff(self.times)))

    def dt(self, j):
        return self.h if self.h is not None else float(self.times[j + 1] - self.times[j])

    def locate(self, t):
        """Index j with t_j <= t < t_{j+1} (the last step for t = T)."""
        if not 0.0 <= t <= self.T:
            raise ValueError(f"time {t} outside [0, {self.T}]")
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(j, self.steps - 1)


def make_partition(T, steps) -> Partition:
    if not T > 0:
        raise ValueError("T must be positive")
    if int(steps) != steps or steps < 1:
        raise ValueError("steps must be a positive integer")
    steps = int(steps)
    h = T / steps
    times = np.arange(steps + 1, dtype=float) * h
    times[-1] = T
    return Partition(times, h)


@dataclass(frozen=True)
class BrownianDriver:
    seed: int
    M: int
    d: int = 1

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.M < 1 or self.d < 1:
            raise ValueError("M and d must be positive")

    def _normals(self, counter):
        g = np.random.Generator(np.random.Philox(key=(counter << 64) | self.seed))
        return g.standard_normal((self.M, self.d))

    def increments(self, j, dt):
        """(M, d) array of N(0, dt) increments for step j."""
        return np.sqrt(dt) * self._normals(j)

    def bridge_normals(self, j):
        """Independent standard normals used to fill in W between t_j and t_{j+1}."""
        return self._normals(_BRIDGE + j)


@dataclass(frozen=True)
class AggregatedDriver:
    """Coarse increments formed by summing ``ratio`` consecutive fine ones."""

    base: BrownianDriver
    fine: Partition
    ratio: int

    @property
    def M(self):
        return self.base.M

    @property
    def d(self):
        return self.base.d

    def increments(self, j, dt=None):
        k0 = j * self.ratio
        acc = self.base.increments(k0, self.fine.dt(k0))
        for k in range(k0 + 1, k0 + self.ratio):
            acc = acc + self.base.increments(k, self.fine.dt(k))
        return acc

    def bridge_normals(self, j):
        raise NotImplementedError("bridge replay is only defined for the base driver")


@dataclass
class SimulationOutput:
    grid: Partition
    paths: np.ndarray | None          # recorded particles x (steps + 1)
    path_index: np.ndarray            # particle labels of the rows of ``paths``
    final: np.ndarray                 # all particles at T
    empiricalMeans: np.ndarray        # mean of the clipped particles per node
    stats: list                       # MeasureStats per node
    excursions: int                   # particles that ever left [0, N]
    meta: dict = field(default_factory=dict)

    def row(self, particle):
        hit = np.nonzero(self.path_index == particle)[0]
        if hit.size == 0:
            raise KeyError(f"path of particle {particle} was not recorded")
        return self.paths[hit[0]]


def _initial(i0, M):
    if callable(i0):
        x = np.asarray(i0(M), dtype=float)
    else:
        x = np.broadcast_to(np.asarray(i0, dtype=float), (M,)).copy()
    if x.shape != (M,) or not np.all(np.isfinite(x)):
        raise ValueError("initial law must produce M finite values")
    return x


def _record_index(M, steps, record):
    if record is True or (record is None and M * (steps + 1) <= 20_000_000):
        return np.arange(M)
    if record is False or record == 0:
        return np.arange(0)
    if record is None:
        record = 200
    return np.unique(np.linspace(0, M - 1, min(int(record), M)).astype(np.int64))


def simulate_particles(model: GeneralModel, grid: Partition, M: int, seed: int = 0,
                       i0=0.0, record=None, driver=None) -> SimulationOutput:
    """Run the particle scheme on ``grid``.

    ``i0`` is a constant, an array of M values, or a callable M -> array.
    ``record`` selects stored paths: True (all), False (none), an integer
    count (evenly spaced labels) or None (all when small enough, else 200).
    """
    if M < 1:
        raise ValueError("need at least one particle")
    start = time.perf_counter()
    driver = driver or BrownianDriver(seed, M, model.d)
    if driver.M != M or driver.d != model.d:
        raise ValueError("driver shape does not match (M, d)")
    steps = grid.steps
    idx = _record_index(M, steps, record)
    paths = np.empty((idx.size, steps + 1)) if idx.size else None
    means = np.empty(steps + 1)
    stats_log = []
    x = _initial(i0, M)
    outside = np.zeros(M, dtype=bool)

    for j in range(steps + 1):
        t = float(grid.times[j])
        y = model.N(t)
        if not np.all(np.isfinite(x)):
            raise NumericAbort(j, model.name)
        outside |= (x < 0) | (x > y)
        if paths is not None:
            paths[:, j] = x[idx]
        clipped = np.clip(x, 0.0, y)
        stats = model.measure_stats(t, clipped)
        means[j] = stats.mean
        stats_log.append(stats)
        if j == steps:
            break
        dt = grid.dt(j)
        try:
            b = model.coefficients(t, stats)
        except ModelError:
            raise NumericAbort(j, model.name) from None
        sig = model.diffusion.evaluate(t, x, y)
        dW = driver.increments(j, dt)
        x = x + _horner(b, clipped) * dt + np.einsum("im,mi->m", sig, dW)

    return SimulationOutput(
        grid=grid, paths=paths, path_index=idx, final=x.copy(), empiricalMeans=means,
        stats=stats_log, excursions=int(outside.sum()),
        meta={"seed": seed, "model": model.name, "M": M, "wall_time": time.perf_counter() - start})


def interpolated_value(output: SimulationOutput, model: GeneralModel, particle, t, seed=None):
    """Value of the interpolated scheme at time t for recorded particle(s).

    W_t - W_{t_j} is rebuilt as a Brownian bridge from the step increment and
    an independent normal of the bridge sub-stream.  ``particle`` may be an
    int or None (all recorded particles).
    """
    grid = output.grid
    j = grid.locate(t)
    tj = float(grid.times[j])
    if t == tj:
        return _grid_values(output, particle, j)
    seed = output.meta["seed"] if seed is None else seed
    M = output.meta["M"]
    driver = BrownianDriver(seed, M, model.d)
    h = grid.dt(j)
    s = t - tj
    if particle is None:
        labels, xj = output.path_index, _grid_values(output, None, j)
    else:
        labels, xj = np.array([particle]), np.array([_grid_values(output, particle, j)])
    y = model.N(tj)
    stats = output.stats[j]
    b = model.coefficients(tj, stats)
    drift = _horner(b, np.clip(xj, 0.0, y))
    sig = model.diffusion.evaluate(tj, xj, y)
    dW = driver.increments(j, h)[labels]
    Z = driver.bridge_normals(j)[labels]
    dWs = (s / h) * dW + np.sqrt(s * (h - s) / h) * Z
    val = xj + drift * s + np.einsum("im,mi->m", sig, dWs)
    return float(val[0]) if particle is not None else val


def _grid_values(output, particle, j):
    if output.paths is None:
        raise KeyError("no paths were recorded")
    if particle is None:
        return output.paths[:, j].copy()
    return float(output.row(particle)[j])


def worker_count():
    try:
        n = int(os.environ.get("MVSIS_THREADS", "1"))
    except ValueError:
        n = 1
    return max(n, 1)


def coupled_sweep(models, grid: Partition, M: int, seed: int = 0, i0=0.0, record=None):
    """Run every model against the same Brownian increments."""
    models = list(models)
    if not models:
        return []
    d = models[0].d
    if any(m.d != d for m in models):
        raise ValueError("all models of a coupled sweep need the same noise dimension")
    i0s = i0 if isinstance(i0, (list, tuple)) else [i0] * len(models)
    if len(i0s) != len(models):
        raise ValueError("one initial value per model expected")

    def run(k):
        return simulate_particles(models[k], grid, M, seed, i0s[k], record)

    n = min(worker_count(), len(models))
    if n == 1:
        return [run(k) for k in range(len(models))]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(run, range(len(models))))


def refine_ratio(fine: Partition, coarse_steps: int) -> int:
    if fine.steps % coarse_steps:
        raise ValueError("coarse grid must divide the fine grid")
    return fine.steps // coarse_steps


def simulate_coarse(model: GeneralModel, fine: Partition, coarse_steps: int, M: int,
                    seed: int = 0, i0=0.0, record=False) -> SimulationOutput:
    """Scheme on a coarser equidistant grid driven by the summed fine increments."""
    r = refine_ratio(fine, coarse_steps)
    coarse = make_partition(fine.T, coarse_steps)
    drv = AggregatedDriver(BrownianDriver(seed, M, model.d), fine, r)
    return simulate_particles(model, coarse, M, seed, i0, record, driver=drv)


__all__ = ["Partition", "make_partition", "BrownianDriver", "AggregatedDriver",
           "SimulationOutput", "simulate_particles", "interpolated_value", "coupled_sweep",
           "simulate_coarse", "NumericAbort", "MeasureStats"]
