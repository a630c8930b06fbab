"""Model family: polynomial-drift mean-field SIS equations with power-sum noise.

The drift of the general model is sum_i b_i(t, N(t), stats) * x**i where the
coefficients may depend on the law of the solution through ``MeasureStats``.
The diffusion is a sum of power functions of x and N(t) - x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .measures import exact_mean


class ModelError(ValueError):
    pass


class TimeFunction:
    """A coefficient of time with an optional declared bound and limit.

    ``limit`` is the value as t -> infinity; it is only known when the user
    declares it (or when the function is constant).
    """

    __slots__ = ("fn", "bound", "limit", "value")

    def __init__(self, fn=None, bound=None, limit=None, value=None):
        if fn is None and value is None:
            raise ModelError("TimeFunction needs a callable or a constant value")
        self.fn = fn
        self.bound = bound
        self.limit = limit
        self.value = value

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls(None, bound=abs(c), limit=c, value=c)

    @property
    def is_constant(self):
        return self.value is not None

    def __call__(self, t):
        if self.value is not None:
            return self.value
        return float(self.fn(t))

    def __repr__(self):
        if self.is_constant:
            return f"TimeFunction.constant({self.value!r})"
        return f"TimeFunction({self.fn!r}, bound={self.bound!r}, limit={self.limit!r})"

    def first_violation(self, times):
        """First grid time where the value is non-finite or exceeds the bound."""
        for t in times:
            v = self(t)
            if not math.isfinite(v):
                return float(t)
            if self.bound is not None and abs(v) > self.bound * (1 + 1e-12):
                return float(t)
        return None


def as_tf(v) -> TimeFunction:
    if isinstance(v, TimeFunction):
        return v
    if callable(v):
        return TimeFunction(v)
    return TimeFunction.constant(v)


ZERO = TimeFunction.constant(0.0)


@dataclass(frozen=True)
class PopulationFunction:
    N: TimeFunction
    dN: TimeFunction

    @classmethod
    def constant(cls, n):
        if not n > 0:
            raise ModelError(f"population size must be positive, got {n}")
        return cls(TimeFunction.constant(n), ZERO)

    def __call__(self, t):
        return self.N(t)

    @property
    def is_constant(self):
        return self.N.is_constant and self.dN.is_constant and self.dN.value == 0.0

    def derivative_defect(self, times, h=1e-6):
        """Largest |N(t+h) - N(t) - dN(t) h| / h over the sample times."""
        worst = 0.0
        for t in times:
            worst = max(worst, abs(self.N(t + h) - self.N(t) - self.dN(t) * h) / h)
        return worst


def _pow(a, e):
    if e == 1.0:
        return a
    if e == 0.5:
        return np.sqrt(a)
    if e == 2.0:
        return a * a
    return np.power(a, e)


@dataclass(frozen=True)
class PowerSumDiffusion:
    """Row i is sum_j g[i][j](t) * x**zeta[i][j] * (y - x)**eta[i][j]."""

    g: tuple
    zeta: tuple
    eta: tuple

    def __post_init__(self):
        g = tuple(tuple(as_tf(v) for v in row) for row in self.g)
        zeta = tuple(tuple(float(v) for v in row) for row in self.zeta)
        eta = tuple(tuple(float(v) for v in row) for row in self.eta)
        shape = [len(r) for r in g]
        if not g or [len(r) for r in zeta] != shape or [len(r) for r in eta] != shape:
            raise ModelError("g, zeta and eta must share the same d x m shape")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "eta", eta)

    @property
    def d(self):
        return len(self.g)

    @property
    def m(self):
        return max(len(r) for r in self.g)

    def exponents(self):
        return [e for rows in (self.zeta, self.eta) for r in rows for e in r]

    @property
    def holder_regime(self):
        return all(e >= 0.5 for e in self.exponents())

    @property
    def lipschitz(self):
        return all(e >= 1.0 for e in self.exponents())

    def evaluate(self, t, x, y):
        """Positive-part extension evaluated at x (scalar or array); shape (d,) + x.shape."""
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        rp = np.maximum(y - x, 0.0)
        out = np.zeros((self.d,) + x.shape)
        for i, row in enumerate(self.g):
            for j, gij in enumerate(row):
                c = gij(t)
                if c == 0.0:
                    continue
                out[i] += c * _pow(xp, self.zeta[i][j]) * _pow(rp, self.eta[i][j])
        return out


@dataclass(frozen=True)
class MeasureStats:
    mean: float
    phiMeans: Mapping[str, float] | None = None


@dataclass(frozen=True)
class RepresentativeParams:
    """Coefficients of the cubic-drift SIS family with two noise rows."""

    N: PopulationFunction
    beta: TimeFunction
    mu: TimeFunction
    gamma: TimeFunction
    beta0: TimeFunction = ZERO
    beta1: TimeFunction = ZERO
    c12: TimeFunction = ZERO
    c21: TimeFunction = ZERO
    c22: TimeFunction = ZERO
    g11: TimeFunction = ZERO
    g12: TimeFunction = ZERO
    g21: TimeFunction = ZERO
    eta0: float = 1.0

    def __post_init__(self):
        if not isinstance(self.N, PopulationFunction):
            object.__setattr__(self, "N", PopulationFunction.constant(self.N))
        for name in ("beta", "mu", "gamma", "beta0", "beta1", "c12", "c21", "c22",
                     "g11", "g12", "g21"):
            object.__setattr__(self, name, as_tf(getattr(self, name)))
        if self.eta0 not in (0.5, 1.0):
            raise ModelError(f"eta0 must be 1/2 or 1, got {self.eta0}")
        object.__setattr__(self, "eta0", float(self.eta0))

    def coefficient_names(self):
        return ("beta", "mu", "gamma", "beta0", "beta1", "c12", "c21", "c22",
                "g11", "g12", "g21")

    def at(self, t):
        """Plain dict of all coefficient values at time t (plus N and dN)."""
        v = {n: getattr(self, n)(t) for n in self.coefficient_names()}
        v["N"] = self.N(t)
        v["dN"] = self.N.dN(t)
        return v

    def negative_rate(self, times):
        for t in times:
            for n in ("beta", "mu", "gamma", "beta0"):
                if getattr(self, n)(t) < 0:
                    return n, float(t)
        return None


@dataclass(frozen=True)
class SimulatedModelParams:
    N: float
    beta: float
    gamma: float
    mu: float
    sigma: float
    alpha: float = 0.0
    i0: float = 50.0

    def __post_init__(self):
        if not self.N > 0:
            raise ModelError("N must be positive")
        if min(self.beta, self.gamma, self.mu, self.sigma) < 0:
            raise ModelError("beta, gamma, mu, sigma must be nonnegative")
        if self.alpha < -1:
            raise ModelError("alpha must be >= -1")
        if not 0 < self.i0 < self.N:
            raise ModelError("i0 must lie strictly between 0 and N")


Coefficient = Callable[[float, float, MeasureStats], float]


@dataclass(frozen=True)
class GeneralModel:
    k: int
    coeffs: tuple
    diffusion: PowerSumDiffusion
    N: PopulationFunction
    family: RepresentativeParams | None = None
    phi: Mapping[str, Callable] | None = None
    name: str = "general"
    lipschitz_moduli: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 1 or len(self.coeffs) != self.k + 1:
            raise ModelError("need k >= 1 and k + 1 drift coefficients")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @property
    def d(self):
        return self.diffusion.d

    def coefficients(self, t, stats):
        y = self.N(t)
        b = np.array([c(t, y, stats) for c in self.coeffs], dtype=float)
        if not np.all(np.isfinite(b)):
            raise ModelError(f"non-finite drift coefficient at t={t}")
        return b

    def measure_stats(self, t, clipped):
        """Statistics of the (already clipped) atoms that the drift depends on."""
        clipped = np.asarray(clipped, dtype=float)
        phi = None
        if self.phi:
            phi = {k: exact_mean(np.broadcast_to(f(t, clipped), clipped.shape))
                   for k, f in self.phi.items()}
        return MeasureStats(exact_mean(clipped), phi)


def _horner(b, x):
    acc = np.full_like(x, b[-1]) if isinstance(x, np.ndarray) else b[-1]
    for c in b[-2::-1]:
        acc = acc * x + c
    return acc


def drift(model: GeneralModel, t, x, stats: MeasureStats):
    y = model.N(t)
    xc = np.minimum(np.maximum(np.asarray(x, dtype=float), 0.0), y)
    out = _horner(model.coefficients(t, stats), xc)
    return float(out) if np.ndim(out) == 0 else out


def diffusion(model: GeneralModel, t, x):
    return model.diffusion.evaluate(t, x, model.N(t))


# ---------------------------------------------------------------------------
# constructors


def _representative_coeffs(p: RepresentativeParams):
    def b0(t, y, s):
        return p.beta0(t) * s.mean * y

    def b1(t, y, s):
        return (-(p.mu(t) + p.gamma(t)) + (p.beta1(t) - p.beta0(t)) * s.mean
                + p.beta(t) * y + p.c12(t) * y * y)

    def b2(t, y, s):
        return -p.beta1(t) * s.mean / y - p.beta(t) + p.c21(t) * y + p.c22(t) * y * y

    def b3(t, y, s):
        return -(p.c12(t) + p.c21(t) + p.c22(t) * y)

    return (b0, b1, b2, b3)


def build_representative(params: RepresentativeParams, times=None, name="representative"):
    """Cubic-drift model of the representative family.

    ``times`` (optional) is a set of sample times on which the nonnegativity
    of beta0, beta, mu, gamma is checked.
    """
    if times is not None:
        bad = params.negative_rate(times)
        if bad:
            raise ModelError(f"{bad[0]} negative at t={bad[1]}")
    e = params.eta0
    diff = PowerSumDiffusion(
        g=((params.g11, params.g12), (params.g21, ZERO)),
        zeta=((1, 1), (1, 1)),
        eta=((1, e), (e, e)),
    )
    return GeneralModel(3, _representative_coeffs(params), diff, params.N,
                        family=params, name=name)


def build_tractable(N, c0=0.0, c11=0.0, c12=0.0, c21=0.0, c22=0.0,
                    phi0=None, phi1=None, phi2=None,
                    g=((0.0, 0.0), (0.0, 0.0)), zeta=(1.0, 1.0),
                    eta=((1.0, 1.0), (1.0, 1.0)), lipschitz_moduli=None):
    """Cubic model whose coefficients depend on the law through E[phi_i(t, I)].

    phi_i are callables (t, x_array) -> array; missing ones are zero.
    """
    pop = N if isinstance(N, PopulationFunction) else PopulationFunction.constant(N)
    c0, c11, c12, c21, c22 = (as_tf(v) for v in (c0, c11, c12, c21, c22))
    zero = lambda t, x: np.zeros_like(x)  # noqa: E731
    phi = {"phi0": phi0 or zero, "phi1": phi1 or zero, "phi2": phi2 or zero}

    def b0(t, y, s):
        return c0(t) + y * s.phiMeans["phi0"]

    def b1(t, y, s):
        return s.phiMeans["phi1"] + c11(t) * y + c12(t) * y * y

    def b2(t, y, s):
        return s.phiMeans["phi2"] / y - c11(t) + c21(t) * y + c22(t) * y * y

    def b3(t, y, s):
        return -(c12(t) + c21(t) + c22(t) * y)

    diff = PowerSumDiffusion(g=g, zeta=tuple((z, z) for z in zeta), eta=eta)
    return GeneralModel(3, (b0, b1, b2, b3), diff, pop, phi=phi, name="tractable",
                        lipschitz_moduli=dict(lipschitz_moduli or {}))


def simulated_family(p: SimulatedModelParams) -> RepresentativeParams:
    return RepresentativeParams(
        N=PopulationFunction.constant(p.N), beta=p.beta, mu=p.mu, gamma=p.gamma,
        beta1=p.alpha * p.beta, g11=p.sigma, eta0=0.5)


def gghmp(p: SimulatedModelParams) -> GeneralModel:
    """dI = (beta (1 + alpha E[I]/N) I (N - I) - (mu + gamma) I) dt + sigma I (N - I) dW."""
    n, beta, mg, alpha = p.N, p.beta, p.mu + p.gamma, p.alpha

    def b1(t, y, s):
        return beta * (1 + alpha * s.mean / y) * y - mg

    def b2(t, y, s):
        return -beta * (1 + alpha * s.mean / y)

    diff = PowerSumDiffusion(g=((p.sigma,),), zeta=((1,),), eta=((1,),))
    return GeneralModel(2, (lambda t, y, s: 0.0, b1, b2), diff,
                        PopulationFunction.constant(n), family=simulated_family(p),
                        name="gghmp")


def wang(N, beta_e, beta_init, theta, xi, mu, gamma, beta1=0.0) -> GeneralModel:
    """Transmission relaxing from beta_init to beta_e; noise intensity of an OU-type average."""
    if not (theta > 0 and xi > 0):
        raise ModelError("theta and xi must be positive")
    beta_t = TimeFunction(lambda t: beta_e + (beta_init - beta_e) * math.exp(-theta * t),
                          bound=max(beta_e, beta_init), limit=beta_e)
    g_t = TimeFunction(lambda t: xi / math.sqrt(2 * theta) * math.sqrt(-math.expm1(-2 * theta * t)),
                       bound=xi / math.sqrt(2 * theta), limit=xi / math.sqrt(2 * theta))
    pop = N if isinstance(N, PopulationFunction) else PopulationFunction.constant(N)
    b1f, mu, gamma = as_tf(beta1), as_tf(mu), as_tf(gamma)
    fam = RepresentativeParams(N=pop, beta=beta_t, mu=mu, gamma=gamma, beta1=b1f,
                               g11=g_t, eta0=1.0)

    def rate(t, y, s):
        return beta_t(t) + b1f(t) * s.mean / y

    coeffs = (lambda t, y, s: 0.0,
              lambda t, y, s: rate(t, y, s) * y - mu(t) - gamma(t),
              lambda t, y, s: -rate(t, y, s),
              lambda t, y, s: 0.0)
    diff = PowerSumDiffusion(g=((g_t, 0.0), (0.0, 0.0)), zeta=((1, 1), (1, 1)),
                             eta=((1, 1), (1, 1)))
    return GeneralModel(3, coeffs, diff, pop, family=fam, name="wang")


def cai(N, beta, mu, gamma, a1, a2, a3, sigma1, sigma2, beta1=0.0) -> GeneralModel:
    """Two correlated noise sources; square-root terms in N - I."""
    if a1 < 0 or a3 < 0 or sigma1 < 0 or sigma2 < 0:
        raise ModelError("a1, a3, sigma1, sigma2 must be nonnegative")
    pop = N if isinstance(N, PopulationFunction) else PopulationFunction.constant(N)
    beta, mu, gamma, b1f = as_tf(beta), as_tf(mu), as_tf(gamma), as_tf(beta1)
    fam = RepresentativeParams(N=pop, beta=beta, mu=mu, gamma=gamma, beta1=b1f,
                               g11=a1 * sigma1, g12=-a2 * sigma2, g21=-a3 * sigma2,
                               eta0=0.5)

    def rate(t, y, s):
        return beta(t) + b1f(t) * s.mean / y

    coeffs = (lambda t, y, s: 0.0,
              lambda t, y, s: rate(t, y, s) * y - mu(t) - gamma(t),
              lambda t, y, s: -rate(t, y, s),
              lambda t, y, s: 0.0)
    diff = PowerSumDiffusion(g=((a1 * sigma1, -a2 * sigma2), (-a3 * sigma2, 0.0)),
                             zeta=((1, 1), (1, 1)), eta=((1, 0.5), (0.5, 0.5)))
    return GeneralModel(3, coeffs, diff, pop, family=fam, name="cai")


def _mapped(tf: TimeFunction, f) -> TimeFunction:
    if tf.is_constant:
        return TimeFunction.constant(f(tf.value))
    return TimeFunction(lambda t: f(tf(t)), limit=None if tf.limit is None else f(tf.limit))


def bernardi(N, beta, mu, gamma, sigma, beta1=0.0) -> GeneralModel:
    """Logistic drift plus the Ito-Stratonovich style term sigma^2/2 I (N-I)(N-2I)."""
    pop = N if isinstance(N, PopulationFunction) else PopulationFunction.constant(N)
    beta, mu, gamma, b1f, sig = as_tf(beta), as_tf(mu), as_tf(gamma), as_tf(beta1), as_tf(sigma)
    s2 = _mapped(sig, lambda v: v * v)
    fam = RepresentativeParams(
        N=pop, beta=beta, mu=mu, gamma=gamma, beta1=b1f,
        c12=_mapped(s2, lambda v: 0.5 * v), c21=_mapped(s2, lambda v: -1.5 * v),
        g11=sig, eta0=1.0)

    def rate(t, y, s):
        return beta(t) + b1f(t) * s.mean / y

    # x (N - x)(N - 2x) = N^2 x - 3 N x^2 + 2 x^3
    coeffs = (lambda t, y, s: 0.0,
              lambda t, y, s: rate(t, y, s) * y - mu(t) - gamma(t) + 0.5 * s2(t) * y * y,
              lambda t, y, s: -rate(t, y, s) - 1.5 * s2(t) * y,
              lambda t, y, s: s2(t))
    diff = PowerSumDiffusion(g=((sig, 0.0), (0.0, 0.0)), zeta=((1, 1), (1, 1)),
                             eta=((1, 1), (1, 1)))
    return GeneralModel(3, coeffs, diff, pop, family=fam, name="bernardi")


# ---------------------------------------------------------------------------
# condition checks


@dataclass(frozen=True)
class Check:
    ok: bool | None
    first_violation: float | None = None
    note: str = ""


@dataclass(frozen=True)
class ConditionReport:
    exponents_in_range: Check
    lipschitz_exponents: Check
    boundary_vanishing: Check
    value_condition: Check
    strict_value_condition: Check
    power_sum_condition: Check

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _first_fail(times, pred):
    for t in times:
        if not pred(t):
            return float(t)
    return None


def _check(times, pred, note=""):
    bad = _first_fail(times, pred)
    return Check(bad is None, bad, note)


def _strict_penalty(diff: PowerSumDiffusion, t, y):
    """Diffusion terms that the strict value condition adds to the right-hand side."""
    total = 0.0
    for i, row in enumerate(diff.g):
        z = diff.zeta[i][0]
        g = [gij(t) for gij in row]
        et = diff.eta[i]
        total += 0.5 * y ** (2 * z) * sum(gj * gj for gj, e in zip(g, et) if e < 1)
        if len(g) > 1 and et[0] + et[1] < 2:
            total += y ** (2 * z) * max(g[0] * g[1], 0.0)
    return total


def _power_sum_lhs(diff: PowerSumDiffusion, t, y, which):
    total = 0.0
    for i, row in enumerate(diff.g):
        g = [gij(t) for gij in row]
        for j1 in range(len(g)):
            for j2 in range(len(g)):
                if which == "zeta":
                    cond = diff.zeta[i][j1] + diff.zeta[i][j2] < 2
                    pw = diff.eta[i][j1] + diff.eta[i][j2]
                else:
                    cond = diff.eta[i][j1] + diff.eta[i][j2] < 2
                    pw = diff.zeta[i][j1] + diff.zeta[i][j2]
                if cond:
                    total += max(g[j1] * g[j2], 0.0) * y ** pw
    return 0.5 * total


def check_conditions(model: GeneralModel, grid) -> ConditionReport:
    times = np.asarray(getattr(grid, "times", grid), dtype=float)
    diff = model.diffusion
    exps = Check(diff.holder_regime, None if diff.holder_regime else float(times[0]))
    lip = Check(diff.lipschitz, None if diff.lipschitz else float(times[0]))

    def vanishes(t):
        y = model.N(t)
        return (np.all(diff.evaluate(t, 0.0, y) == 0.0)
                and np.all(diff.evaluate(t, y, y) == 0.0))

    boundary = _check(times, vanishes)

    fam = model.family
    if fam is None and model.phi is None:
        unknown = Check(None, None, "no analytic structure")
        return ConditionReport(exps, lip, boundary, unknown, unknown, unknown)

    if fam is not None:
        def value(t):
            return fam.N.dN(t) >= -(fam.mu(t) + fam.gamma(t)) * fam.N(t)

        def strict(t):
            y = fam.N(t)
            return (fam.N.dN(t) >= -(fam.mu(t) + fam.gamma(t)) * y
                    + _strict_penalty(model.diffusion, t, y))

        def power_sum(t):
            y = fam.N(t)
            # b0 >= 0 with minimum 0 at E[I] = 0; drift at x = N is -(mu+gamma) N
            rhs2 = fam.N.dN(t) + (fam.mu(t) + fam.gamma(t)) * y
            return (_power_sum_lhs(diff, t, y, "zeta") <= 0.0
                    and _power_sum_lhs(diff, t, y, "eta") <= rhs2)

        return ConditionReport(exps, lip, boundary, _check(times, value),
                               _check(times, strict), _check(times, power_sum))

    # tractable class: sample phi sums on a grid of x in [0, N]
    def phi_sum_max(t):
        y = model.N(t)
        xs = np.linspace(0.0, y, 201)
        return float(np.max(sum(f(t, xs) for f in model.phi.values())))

    def c0(t):
        return model.coeffs[0](t, model.N(t), MeasureStats(0.0, {"phi0": 0.0, "phi1": 0.0, "phi2": 0.0}))

    def value_t(t):
        return model.N.dN(t) >= c0(t) + phi_sum_max(t) * model.N(t)

    def strict_t(t):
        y = model.N(t)
        return model.N.dN(t) >= c0(t) + phi_sum_max(t) * y + _strict_penalty(diff, t, y)

    note = "phi maxima sampled on 201 points"
    return ConditionReport(exps, lip, boundary, _check(times, value_t, note),
                           _check(times, strict_t, note),
                           Check(None, None, "needs b0 and drift at N over all laws"))


# ---------------------------------------------------------------------------
# hat coefficients


@dataclass(frozen=True)
class HatCoeffs:
    """Analytic coefficient bounds at one time t with y = N(t).

    bhat[i] bounds b_i from above; babs[i] bounds |b_i|; bhat4 is the one-sided
    Lipschitz bound of the drift polynomial, bhat5 the upper bound of
    sum_{i>=1} b_i x^(i-1), lamhat4 the Lipschitz constant in the law (W1),
    l and lam the growth and Lipschitz bounds of the diffusion.
    bbar / lam0 are continuity constants in time and y supplied by the user
    or derived for time-constant coefficients.
    """

    t: float
    y: float
    bhat: tuple
    babs: tuple
    bhat4: float
    bhat5: float
    lamhat4: float
    l: float | None
    lam: float | None
    bbar: tuple = ()
    lam0: float = 0.0

    @property
    def bhat_k3(self):
        return sum(b * self.y ** i for i, b in enumerate(self.babs[1:]))

    @property
    def bhat_k4(self):
        return sum((i + 1) * b * self.y ** i for i, b in enumerate(self.babs[1:]))


def _diffusion_growth(p: RepresentativeParams, t, y):
    """l = lam = |g| y when every active noise term is Lipschitz (exponent 1), else None."""
    g11, g12, g21 = p.g11(t), p.g12(t), p.g21(t)
    if p.eta0 < 1 and (g12 != 0 or g21 != 0):
        return None
    return math.hypot(g11 + g12, g21) * y


def _pos(v):
    return v if v > 0 else 0.0


def _neg(v):
    return -v if v < 0 else 0.0


def hat_coefficients(model: GeneralModel, t, bbar=None, lam0=0.0, y=None) -> HatCoeffs:
    """Hat coefficients at time t, evaluated at population level y (default N(t))."""
    p = model.family
    if p is None:
        raise ModelError("hat coefficients are only available for the representative family")
    v = p.at(t)
    y = v["N"] if y is None else float(y)
    beta, beta0, beta1 = v["beta"], v["beta0"], v["beta1"]
    mg = v["mu"] + v["gamma"]
    c12, c21, c22 = v["c12"], v["c21"], v["c22"]

    bh0 = beta0 * y * y
    bh1 = -mg + _pos(beta1 - beta0) * y + beta * y + c12 * y * y
    bh2 = _neg(beta1) - beta + c21 * y + c22 * y * y
    bh3 = -(c12 + c21 + c22 * y)
    bh4 = bh1 + _neg(_pos(beta1 - beta0) - _neg(beta0 + beta1) + 2 * beta
                     + (3 * c12 + c21) * y + c22 * y * y) * y
    bh5 = bh1 + _neg(_pos(beta1 - beta0) - _neg(beta0) + beta + c12 * y) * y
    lh4 = (abs(beta0) + abs(beta1 - beta0) + abs(beta1)) * y

    # |b_i| over laws supported in [0, y]: b_i is affine in E[I], extremes at E = 0, y
    base1 = -mg + beta * y + c12 * y * y
    base2 = -beta + (c21 + c22 * y) * y
    babs = (abs(beta0) * y * y,
            max(abs(base1), abs(base1 + (beta1 - beta0) * y)),
            max(abs(base2), abs(base2 - beta1)),
            abs(bh3))
    l = _diffusion_growth(p, t, y)
    if bbar is None:
        # along a constant population with time-constant coefficients the
        # continuity constants are never exercised, so zero is admissible
        if p.N.is_constant and all(getattr(p, n).is_constant for n in p.coefficient_names()):
            bbar = (0.0,) * 4
        else:
            raise ModelError("time-varying model: continuity constants bbar must be supplied")
    return HatCoeffs(t, y, (bh0, bh1, bh2, bh3), babs, bh4, bh5, lh4, l, l,
                     tuple(float(b) for b in bbar), float(lam0))


# ---------------------------------------------------------------------------
# presets by name

PRESETS = ("gghmp", "wang", "cai", "bernardi", "representative", "tractable")


def preset(name: str, **kw) -> GeneralModel:
    """Build a model from a preset name and flat scalar parameters."""
    if name == "gghmp":
        return gghmp(SimulatedModelParams(**kw))
    if name == "wang":
        return wang(**kw)
    if name == "cai":
        return cai(**kw)
    if name == "bernardi":
        return bernardi(**kw)
    if name == "representative":
        return build_representative(RepresentativeParams(**kw))
    if name == "tractable":
        return _tractable_affine(**kw)
    raise ModelError(f"unknown model preset {name!r}; expected one of {', '.join(PRESETS)}")


def _tractable_affine(N, c0=0.0, c11=0.0, c12=0.0, c21=0.0, c22=0.0,
                      phi0_0=0.0, phi0_1=0.0, phi1_0=0.0, phi1_1=0.0, phi2_0=0.0, phi2_1=0.0,
                      g11=0.0, g12=0.0, g21=0.0, g22=0.0,
                      eta11=1.0, eta12=1.0, eta21=1.0, eta22=1.0):
    """Tractable model with affine phi_i(x) = phi_i_0 + phi_i_1 x (config-friendly)."""
    def affine(a, b):
        return lambda t, x: a + b * np.asarray(x)
    return build_tractable(
        N, c0, c11, c12, c21, c22,
        phi0=affine(phi0_0, phi0_1), phi1=affine(phi1_0, phi1_1), phi2=affine(phi2_0, phi2_1),
        g=((g11, g12), (g21, g22)), eta=((eta11, eta12), (eta21, eta22)),
        lipschitz_moduli={"L0": abs(phi0_1), "L1": abs(phi1_1), "L2": abs(phi2_1)})

