from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from mvsis.asymptotics import (LimitData, ZeroConditionError, extinction_report, h_eval, h_limit,
                               max_power32, max_power_sum, max_quadratic, max_quartic_power,
                               persistence_coefficients, persistence_levels, zero_of_f)
from mvsis.model import (MeasureStats, SimulatedModelParams, bernardi, build_representative,
                         RepresentativeParams, cai, gghmp, simulated_family, wang)

P1 = dict(N=100.0, beta=0.5, mu=20.0, gamma=25.0, sigma=0.08)
P2 = dict(P1, sigma=0.01)
coef = st.floats(-10, 10)


def limits(params, alpha, **kw):
    return LimitData.from_params(simulated_family(SimulatedModelParams(**params, alpha=alpha)), **kw)


def brute(a, b, c, d, y, n=200_001):
    x = np.linspace(0, y, n)
    return float(np.max(a + b * x + c * x * x + d * (y - x) ** 1.5))


# ---------------------------------------------------------------------------
# maxima and zeros


@pytest.mark.parametrize("args, want", [((0, 0, -1, 1), (0, 0)), ((1, 2, -1, 3), (2, 1)),
                                        ((0, 1, 1, 2), (6, 2))])
def test_max_quadratic_examples(args, want):
    assert max_quadratic(*args) == pytest.approx(want)


def test_max_power32_examples():
    assert max_power32(1.0, 2.0, 0.0, 3.0) == (7.0, 3.0)
    assert max_power32(0, -1, -1, 1)[0] == pytest.approx(-23 / 27)
    assert max_power32(0, -1, 1, 1) == (1.0, 0.0)


def test_max_quartic_power_examples():
    assert max_quartic_power(0, 0, -1, 1, 1)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        max_quartic_power(0, 0, 1, 1, 1)


@given(coef, coef, st.floats(-10, -1e-3), st.floats(0, 10))
def test_quartic_reduces_to_quadratic_without_power_term(a, b, c, y):
    assert max_quartic_power(a, b, c, 0.0, y)[0] == pytest.approx(max_quadratic(a, b, c, y)[0],
                                                                  abs=1e-9)


@given(coef, coef, coef, coef, st.floats(0, 10))
def test_maxima_argmax_attains_value(a, b, c, d, y):
    for fn, args in ((max_quadratic, (a, b, c, y)), (max_power32, (a, b, d, y)),
                     (max_quartic_power, (a, b, -abs(c) - 1e-3, d, y))):
        val, x = fn(*args)
        aa, bb = args[0], args[1]
        cc = args[2] if fn is not max_power32 else 0.0
        dd = args[3] if fn is max_quartic_power else (args[2] if fn is max_power32 else 0.0)
        assert 0 <= x <= y + 1e-12
        at = aa + bb * x + cc * x * x + dd * max(y - x, 0) ** 1.5
        assert at == pytest.approx(val, abs=1e-8)
        assert val >= brute(aa, bb, cc, dd, y, 2001) - 1e-9


@given(coef, coef, st.floats(1e-3, 10), st.floats(-10, 10).filter(lambda d: d != 0),
       st.floats(0.1, 10))
def test_convex_case_of_power_sum_is_an_upper_bound(a, b, c, d, y):
    assert max_power_sum(a, b, c, d, y)[0] >= brute(a, b, c, d, y, 5001) - 1e-9


def test_zero_examples():
    assert zero_of_f(2, 0, -2, 0, 2) == pytest.approx(1.0)
    assert zero_of_f(1, -2, 0, 0, 1) == pytest.approx(0.5)
    with pytest.raises(ZeroConditionError):
        zero_of_f(-1, 1, 0, 0, 1)
    with pytest.raises(ZeroConditionError):
        zero_of_f(1, 1, 0, 0, 1)


def test_zero_with_double_root_at_y():
    # f = (x - 1)(x - 2) has f(2) = 0; the largest zero is y itself
    assert zero_of_f(2, -3, 1, 0, 2, largest=True) == 2
    assert zero_of_f(2, -3, 1, 0, 2) == pytest.approx(1.0)


@given(st.floats(0.01, 0.99), coef, coef, coef, st.floats(0.1, 10), st.booleans())
def test_zero_is_a_first_sign_change(u, b, c, d, y, quadratic):
    if quadratic:
        d = 0.0
    else:
        c = -abs(c)
    # a between the bounds -d y^1.5 < a < -b y - c y^2 that give f(0) > 0 > f(y)
    lo, hi = -d * y ** 1.5, -b * y - c * y * y
    assume(hi - lo > 1e-3)
    a = lo + u * (hi - lo)
    f = lambda x: a + b * x + c * x * x + d * np.maximum(y - x, 0) ** 1.5  # noqa: E731
    z = zero_of_f(a, b, c, d, y)
    assert abs(f(z)) <= 1e-9
    grid = np.linspace(0, z, 10_001)[1:-1]
    assert np.all(f(grid) > 0)


# ---------------------------------------------------------------------------
# transformed function


def test_h_at_boundaries_for_simulated_model():
    m = gghmp(SimulatedModelParams(**P1))
    assert h_eval(m, 0.0, 100.0, 100.0, MeasureStats(30.0)).value == -45.0
    assert h_eval(m, 0.0, 0.0, 100.0, MeasureStats(0.0)).value == pytest.approx(-27.0)
    assert h_limit(limits(P1, 0.0)) == pytest.approx(-27.0)


def test_h_at_zero_needs_vanishing_beta0():
    m = build_representative(RepresentativeParams(N=10.0, beta=1.0, mu=1.0, gamma=1.0, beta0=0.1))
    with pytest.raises(ValueError):
        h_eval(m, 0.0, 0.0, 10.0, MeasureStats(1.0))


@pytest.mark.parametrize("make", [
    lambda: gghmp(SimulatedModelParams(**P1, alpha=0.7)),
    lambda: wang(100, 0.3, 0.6, 0.5, 0.2, 10, 5, beta1=0.2),
    lambda: cai(100, 0.5, 20, 25, 0.3, 0.4, 0.2, 0.05, 0.1, beta1=-0.1),
    lambda: bernardi(100, 0.5, 20, 25, 0.02, beta1=0.3),
    lambda: build_representative(RepresentativeParams(
        N=50.0, beta=0.4, mu=2.0, gamma=1.0, beta0=0.05, beta1=0.3, c12=1e-3, c21=-2e-3,
        c22=1e-5, g11=0.01, g12=0.02, g21=0.03, eta0=0.5)),
])
def test_h_closed_form_matches_general_form(make):
    m = make()
    bare = replace(m, family=None)
    rng = np.random.default_rng(5)
    for _ in range(1000):
        t = rng.uniform(0, 10)
        y = m.N(t)
        x, E = rng.uniform(1e-3, y), rng.uniform(0, y)
        s = MeasureStats(E)
        assert h_eval(m, t, x, y, s).value == pytest.approx(h_eval(bare, t, x, y, s).value,
                                                             rel=1e-10, abs=1e-10)


@given(st.floats(0, 10), st.floats(0, 100))
def test_h_at_full_population_is_minus_recovery(t, E):
    m = cai(100, 0.5, 20, 25, 0.3, 0.4, 0.2, 0.05, 0.1, beta1=-0.1)
    assert h_eval(m, t, 100.0, 100.0, MeasureStats(E)).value == -45.0


# ---------------------------------------------------------------------------
# reports


def test_extinction_examples():
    rep = extinction_report(limits(P1, 0.0), "simulated")
    assert rep.verdict.kind == "Extinct"
    assert rep.verdict.h_inf == pytest.approx(-27.0)
    assert rep.reproductionRatio == pytest.approx(0.4)
    assert extinction_report(limits(P1, 0.5), "simulated").verdict.kind == "Extinct"
    assert extinction_report(limits(P1, 0.6), "simulated").verdict.kind == "Inconclusive"
    with pytest.raises(ValueError):
        extinction_report(limits(P1, 0.0), "M.9")


@pytest.mark.parametrize("beta, beta1", [(0.0, 0.0), (0.2, -0.3)])
def test_extinction_when_transmission_below_negative_feedback(beta, beta1):
    L = LimitData(Ninf=100.0, muinf_plus_gammainf=45.0, betainf=beta, beta1inf=beta1,
                  g11inf=0.1)
    rep = extinction_report(L)
    assert rep.details["u_quadratic_penalty"] == -45.0
    assert rep.verdict.kind == "Extinct"
    rep0 = extinction_report(replace(L, muinf_plus_gammainf=0.0))
    assert rep0.details["u_quadratic_penalty"] == 0.0


def test_quadratic_penalty_needs_strict_a2():
    L = LimitData(Ninf=100.0, muinf_plus_gammainf=45.0, betainf=0.0)
    assert "u_quadratic_penalty" not in extinction_report(L).details


@given(st.floats(0.01, 2), st.floats(0, 0.2), st.floats(-1, 3), st.floats(0.5, 100))
def test_reproduction_ratio_and_extinction_agree(beta, sigma, alpha, mg):
    p = dict(N=100.0, beta=beta, mu=mg / 2, gamma=mg / 2, sigma=sigma)
    rep = extinction_report(limits(p, alpha), "simulated")
    assume(abs(rep.reproductionRatio - 1) > 1e-9)
    if rep.verdict.kind == "Extinct":
        assert rep.reproductionRatio < 1
    if beta + max(alpha * beta, 0) >= sigma ** 2 * 100:
        # the envelope of h peaks at x = 0, where it equals (ratio - 1)(mu + gamma)
        assert (rep.verdict.kind == "Extinct") == (rep.reproductionRatio < 1)


def test_report_lines():
    lines = extinction_report(limits(P1, 0.0), "simulated").as_lines("x.")
    assert lines[0] == "x.verdict = Extinct"
    assert any(line.startswith("x.reproduction_ratio") for line in lines)


def test_noiseless_persistence_level():
    for b1, want in ((0.2, (-20 + 50) / 0.7), (-0.2, (-20 + 30) / 0.5)):
        L = LimitData(Ninf=100.0, muinf_plus_gammainf=20.0, betainf=0.5, beta1inf=b1)
        assert persistence_levels(L).verdict.level == pytest.approx(want, rel=1e-12)


def test_persistence_levels_simulated_examples():
    levels = [persistence_levels(limits(P2, a), "simulated").verdict.level
              for a in (-0.08, 0.0, 0.5, 1.0)]
    assert levels == pytest.approx([1.0203, 9.1751, 6.0786, 4.5444], abs=5e-5)


def test_persistence_with_m_inf_is_around():
    rep = persistence_levels(limits(P2, 1.0, mInf=0.5 * 30.8548), "simulated")
    assert rep.verdict.kind == "PersistAround"
    assert rep.verdict.level == pytest.approx(30.8561, abs=5e-5)


def test_persistence_rejects_bad_inputs():
    L = limits(P2, 0.5)
    assert persistence_levels(L, x=0.9).verdict.kind == "Inconclusive"
    assert "outside" in persistence_levels(L, x=0.9).verdict.reason
    with pytest.raises(ValueError):
        limits(P2, 0.5, mInf=-10.0)
    assert persistence_levels(limits(P1, 0.0)).verdict.kind == "Inconclusive"


@given(st.floats(0.1, 2), st.one_of(st.just(0.0), st.floats(1e-4, 0.05)), st.floats(-1, 3),
       st.floats(1, 60))
def test_simulated_level_is_the_smallest_positive_root(beta, sigma, alpha, mg):
    p = dict(N=100.0, beta=beta, mu=mg / 2, gamma=mg / 2, sigma=sigma)
    L = limits(p, alpha)
    rep = persistence_levels(L, "simulated")
    assume(rep.verdict.level is not None)
    (a, b, c, d), _ = persistence_coefficients(L, rep.details["x"], rep.details["y"])
    assert d == 0
    roots = [r.real for r in np.roots([c, b, a]) if abs(r.imag) < 1e-12 and 0 < r.real <= 100 + 1e-9]
    assert rep.verdict.level == pytest.approx(min(roots), abs=1e-9)
