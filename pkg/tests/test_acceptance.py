"""Acceptance criteria AC1-AC10, each at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary.
"""
import filecmp
import itertools
import math
import os
import time
from dataclasses import replace

import numpy as np

from mvsis.asymptotics import (LimitData, extinction_report, max_power32, max_quadratic,
                               max_quartic_power, persistence_levels, zero_of_f)
from mvsis.engine import coupled_sweep, make_partition, simulate_particles
from mvsis.harness import (PARAMS_1, PARAMS_2, bounds_audit, default_config, estimate_lyapunov,
                           ordered_fraction, run_convergence_study, run_experiment)
from mvsis.measures import from_samples, wasserstein
from mvsis.model import SimulatedModelParams, gghmp, simulated_family


def _limits(params, alpha, **kw):
    fam = simulated_family(SimulatedModelParams(**params, alpha=alpha))
    return LimitData.from_params(fam, **kw)


def _fastest(fn, repeat=20):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


# ---------------------------------------------------------------------------
# closed forms


def test_ac1_persistence_levels(criterion):
    want = {-0.08: 1.0203, 0.0: 9.1751, 0.5: 6.0786, 1.0: 4.5444}
    got, worst_t = {}, 0.0
    for a, w in want.items():
        L = _limits(PARAMS_2, a)
        got[a] = persistence_levels(L, "simulated").verdict.level
        worst_t = max(worst_t, _fastest(lambda: persistence_levels(L, "simulated")))
    err = max(abs(got[a] - w) for a, w in want.items())
    criterion("AC1 persistence levels", err <= 5e-5 and worst_t < 1e-3,
              f"levels={[round(got[a], 6) for a in want]} max_err={err:.2e} time={worst_t * 1e3:.3f}ms")


def test_ac2_levels_with_m_inf(criterion):
    beta = PARAMS_2["beta"]
    cases = [(-0.08, -0.6840, 8.5379), (0.5, 8.0154, 16.0257), (1.0, 30.8548, 30.8561)]
    got, worst_t = [], 0.0
    for a, m, _ in cases:
        L = _limits(PARAMS_2, a, mInf=beta * m)
        got.append(persistence_levels(L, "simulated").verdict.level)
        worst_t = max(worst_t, _fastest(lambda: persistence_levels(L, "simulated")))
    err = max(abs(g - w) for g, (_, _, w) in zip(got, cases))
    criterion("AC2 m_inf-informed levels", err <= 5e-5 and worst_t < 1e-3,
              f"levels={[round(g, 6) for g in got]} max_err={err:.2e} time={worst_t * 1e3:.3f}ms")


def test_ac3_extinction_threshold(criterion):
    kinds, worst_t = {}, 0.0
    for a in (0.0, 0.53, 0.54, 0.55):
        L = _limits(PARAMS_1, a)
        kinds[a] = extinction_report(L, "simulated")
        worst_t = max(worst_t, _fastest(lambda: extinction_report(L, "simulated")))
    ok = (kinds[0.0].verdict.kind == "Extinct" and kinds[0.53].verdict.kind == "Extinct"
          and kinds[0.54].verdict.kind != "Extinct" and kinds[0.55].verdict.kind != "Extinct"
          and abs(kinds[0.0].verdict.h_inf + 27) < 1e-12 and worst_t < 1e-3)
    criterion("AC3 extinction threshold", ok,
              " ".join(f"a={a}:{r.verdict.kind}" for a, r in kinds.items())
              + f" h_inf={kinds[0.0].verdict.h_inf} time={worst_t * 1e3:.3f}ms")


# ---------------------------------------------------------------------------
# grid oracles


_U = np.linspace(0.0, 1.0, 1_000_001)
_U2 = _U * _U
_V = (1.0 - _U) ** 1.5
_BUF = np.empty_like(_U)
_TMP = np.empty_like(_U)


def _power_sum_on(a, b, c, d, y, x):
    return a + b * x + c * x * x + d * np.maximum(y - x, 0.0) ** 1.5


def _on_grid(a, b, c, d, y):
    """f on the 10^6-point grid y * u, written into a reused buffer."""
    v = np.multiply(_U, b * y, out=_BUF)
    v += a
    for coef, col in ((c * y * y, _U2), (d * y ** 1.5, _V)):
        if coef:
            v += np.multiply(col, coef, out=_TMP)
    return v


def _grid_max(a, b, c, d, y):
    """Brute-force max on 10^6 points, then three 2001-point zooms around the argmax."""
    v = _on_grid(a, b, c, d, y)
    k = int(np.argmax(v))
    best = float(v[k])
    n = v.size
    lo, hi = y * _U[max(k - 1, 0)], y * _U[min(k + 1, n - 1)]
    for _ in range(3):
        z = np.linspace(lo, hi, 2001)
        w = _power_sum_on(a, b, c, d, y, z)
        i = int(np.argmax(w))
        best = max(best, float(w[i]))
        lo, hi = z[max(i - 1, 0)], z[min(i + 1, z.size - 1)]
    return best


def _grid_zero(a, b, c, d, y):
    """First sign change on 10^6 points, narrowed by repeated 1001-point grids."""
    v = _on_grid(a, b, c, d, y)
    k = int(np.argmax(v <= 0))
    lo, hi = y * _U[k - 1], y * _U[k]
    for _ in range(4):
        z = np.linspace(lo, hi, 1001)
        w = _power_sum_on(a, b, c, d, y, z)
        i = int(np.argmax(w <= 0))
        lo, hi = z[i - 1], z[i]
    return 0.5 * (lo + hi)


def _zero_instance(rng):
    while True:
        a, b, c, d = rng.uniform(-10, 10, 4)
        y = rng.uniform(0.1, 10)
        kind = rng.integers(3)
        if kind == 0:
            d = 0.0
        elif kind == 1:
            c = -abs(c)
        fy = a + b * y + c * y * y
        if not a + d * y ** 1.5 > 0:
            continue
        if d == 0 and (fy < -1e-3):
            return a, b, c, d, y
        if d != 0 and c <= 0 and fy < -1e-3:
            return a, b, c, d, y


def test_ac4_maximisation_and_zero_oracles(criterion):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst = {}
    for name in ("max_quadratic", "max_power32", "max_quartic_power", "zero_of_f"):
        err = 0.0
        for _ in range(1000):
            a, b, c, d = rng.uniform(-10, 10, 4)
            y = rng.uniform(0.0, 10.0)
            if name == "max_quadratic":
                got, want = max_quadratic(a, b, c, y)[0], _grid_max(a, b, c, 0.0, y)
            elif name == "max_power32":
                got, want = max_power32(a, b, d, y)[0], _grid_max(a, b, 0.0, d, y)
            elif name == "max_quartic_power":
                c = -abs(c) or -1.0
                got, want = max_quartic_power(a, b, c, d, y)[0], _grid_max(a, b, c, d, y)
            else:
                a, b, c, d, y = _zero_instance(rng)
                got, want = zero_of_f(a, b, c, d, y), _grid_zero(a, b, c, d, y)
            err = max(err, abs(got - want))
        worst[name] = err
    elapsed = time.perf_counter() - t0
    ok = all(e <= 1e-9 for e in worst.values()) and elapsed < 60
    criterion("AC4 maximisation/zero oracles", ok,
              " ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f" time={elapsed:.1f}s")


def _perm_oracle(x, y, p):
    n = len(x)
    return min(sum(abs(x[i] - y[j]) ** p for i, j in enumerate(perm)) / n
               for perm in itertools.permutations(range(n))) ** (1.0 / p)


def test_ac5_wasserstein_oracle(criterion):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    err = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 8))
        p = int(rng.integers(1, 4))
        x, y = rng.normal(0, 3, n), rng.normal(1, 2, n)
        got = wasserstein(from_samples(x), from_samples(y), p)
        err = max(err, abs(got - _perm_oracle(x.tolist(), y.tolist(), p)))
    elapsed = time.perf_counter() - t0
    criterion("AC5 Wasserstein oracle", err <= 1e-12 and elapsed < 30,
              f"max_err={err:.1e} time={elapsed:.1f}s")


# ---------------------------------------------------------------------------
# simulations


def test_ac6_strong_convergence_rate(criterion):
    cfg = default_config("converge")
    t0 = time.perf_counter()
    fit = run_convergence_study(cfg)
    elapsed = time.perf_counter() - t0
    criterion("AC6 strong convergence rate", 0.35 <= fit.slope <= 0.65 and elapsed < 300,
              f"slope={fit.slope:.3f} errors={[round(e, 3) for e in fit.errors]} time={elapsed:.1f}s")


def test_ac7_lyapunov_extinction(criterion):
    cfg = default_config("lyapunov")
    model = gghmp(SimulatedModelParams(**PARAMS_1, alpha=0.0))
    t0 = time.perf_counter()
    out = simulate_particles(model, make_partition(cfg.T, cfg.steps), cfg.M, cfg.seed, 50.0,
                             record=True)
    fit = estimate_lyapunov(out, (0.2, 1.0))
    elapsed = time.perf_counter() - t0
    criterion("AC7 Lyapunov extinction check", -35 <= fit.median <= -19 and elapsed < 120,
              f"median_slope={fit.median:.3f} excluded={fit.excluded} time={elapsed:.1f}s")


def test_ac8_moment_bound_audits(criterion):
    t0 = time.perf_counter()
    rows = bounds_audit(default_config("bounds"))
    elapsed = time.perf_counter() - t0
    ok = all(r[4] for r in rows) and elapsed < 120
    criterion("AC8 moment-bound audits", ok,
              "; ".join(f"{r[0]}: {r[1]:.4g}<={r[3]:.4g}" for r in rows) + f" time={elapsed:.1f}s")


def test_ac9_coupled_monotonicity(criterion):
    cfg = default_config("persistence")
    models = [gghmp(SimulatedModelParams(**PARAMS_2, alpha=a)) for a in cfg.alphas]
    t0 = time.perf_counter()
    outs = coupled_sweep(models, make_partition(cfg.T, cfg.steps), cfg.M, cfg.seed, 50.0,
                         record=False)
    frac = ordered_fraction([o.empiricalMeans for o in outs])
    elapsed = time.perf_counter() - t0
    criterion("AC9 coupled monotonicity", frac >= 0.99 and elapsed < 600,
              f"ordered_fraction={frac:.4f} time={elapsed:.1f}s")


def _same_csvs(a, b):
    names = sorted(f for f in os.listdir(a) if f.endswith(".csv"))
    if not names or names != sorted(f for f in os.listdir(b) if f.endswith(".csv")):
        return False, names
    _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    return not mismatch and not errors, names


def test_ac10_determinism(criterion, tmp_path, monkeypatch):
    results = []
    for exp, over in (("extinction", {}), ("bounds", {}), ("converge", dict(M=128))):
        dirs = []
        for k, threads in enumerate(("1", "4")):
            monkeypatch.setenv("MVSIS_THREADS", threads)
            out = tmp_path / f"{exp}-{k}"
            run_experiment(replace(default_config(exp, **over), out=str(out)))
            dirs.append(out)
        same, names = _same_csvs(*dirs)
        results.append((exp, same, names))
    criterion("AC10 determinism", all(s for _, s, _ in results),
              " ".join(f"{e}:{'identical' if s else 'DIFFER'}({','.join(n)})" for e, s, n in results))
