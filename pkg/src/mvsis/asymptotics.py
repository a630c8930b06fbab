"""Long-time behaviour of the representative family.

Closed-form maxima and zeros of f(x) = a + b x + c x^2 + d (y - x)^{3/2},
the transformed function h (drift over x minus half the squared relative
noise), extinction verdicts and persistence levels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy.optimize import brentq

from .model import GeneralModel, MeasureStats, ModelError, RepresentativeParams


class ZeroConditionError(ValueError):
    """The sign conditions that guarantee a unique zero do not hold."""


def _pos(v):
    return v if v > 0 else 0.0


def _neg(v):
    return -v if v < 0 else 0.0


# ---------------------------------------------------------------------------
# maxima on [0, y]


def max_quadratic(a, b, c, y):
    """max of a + b x + c x^2 over [0, y] with its argmax."""
    if y < 0:
        raise ValueError("y must be nonnegative")
    if c < 0:
        if b < -2 * c * y:
            bp = _pos(b)
            return a - bp * bp / (4 * c), (-bp / (2 * c))
        return a + b * y + c * y * y, y
    # convex or affine: one of the endpoints
    top = _pos(b + c * y) * y
    return a + top, (y if top > 0 else 0.0)


def max_power32(a, b, d, y):
    """max of a + b x + d (y - x)^{3/2} over [0, y] with its argmax."""
    if y < 0:
        raise ValueError("y must be nonnegative")
    if d < 0 and b < 0 and 9.0 * y * d * d > 4.0 * b * b:
        return a + b * y - 4.0 / 27.0 * b ** 3 / d ** 2, y - 4.0 / 9.0 * (b / d) ** 2
    right, left = b * y, d * math.sqrt(y) * y
    return (a + right, y) if right >= left else (a + left, 0.0)


def max_quartic_power(a, b, c, d, y):
    """max of a + b x + c x^2 + d (y - x)^{3/2} over [0, y], c < 0."""
    if c >= 0:
        raise ValueError("c must be negative; use max_quadratic or max_power32")
    if y < 0:
        raise ValueError("y must be nonnegative")
    B = b + 2 * c * y
    e = 2.25 * d * d + 8 * c * B
    if (B >= 0 and d > 0) or B < 0:
        if e > 0:
            z = -(1.5 * d + math.sqrt(e)) / (4 * c)
            if z < math.sqrt(y):
                base = a + b * y + c * y * y
                gain = z ** 3 * _neg(c * z + 0.5 * d)
                return base + gain, (y - z * z if gain > 0 else y)
    right, left = (b + c * y) * y, d * math.sqrt(y) * y
    return (a + right, y) if right >= left else (a + left, 0.0)


def max_power_sum(a, b, c, d, y):
    """Dispatch to the closed form that covers (c, d)."""
    if c < 0:
        return max_quartic_power(a, b, c, d, y)
    if d == 0:
        return max_quadratic(a, b, c, y)
    if c == 0:
        return max_power32(a, b, d, y)
    # c > 0 and d != 0: no closed form; sum of the two separate maxima bounds it
    q, xq = max_quadratic(a, b, c, y)
    return q + max(d, 0.0) * y ** 1.5, xq


# ---------------------------------------------------------------------------
# zeros


def _f(a, b, c, d, y, x):
    return a + b * x + c * x * x + d * max(y - x, 0.0) ** 1.5


def _quadratic_root(a, b, c):
    """Root (-b - sqrt(b^2 - 4ac)) / (2c) without cancellation; linear when c ~ 0."""
    if abs(c) < 1e-14 * max(abs(a), abs(b), 1.0):
        return -a / b
    disc = max(b * b - 4 * a * c, 0.0)
    s = math.sqrt(disc)
    if b >= 0:
        return (-b - s) / (2 * c)
    return 2 * a / (-b + s)


def zero_of_f(a, b, c, d, y, largest=False):
    """Zero of f(x) = a + b x + c x^2 + d (y - x)^{3/2} in (0, y].

    Uniqueness needs f(0) > 0 and either d = 0 with (c <= 0, f(y) <= 0) or
    (c > 0, f(y) < 0), or c <= 0, d != 0 and f(y) < 0.  With c > 0, d = 0 and
    f(y) = 0 two zeros are possible; ``largest`` then returns y.
    """
    if not y > 0:
        raise ZeroConditionError("y must be positive")
    if not a + d * y ** 1.5 > 0:
        raise ZeroConditionError("f(0) = a + d y^(3/2) must be positive")
    fy = a + b * y + c * y * y
    if d == 0:
        if c <= 0 and fy <= 0 or c > 0 and fy < 0:
            return _quadratic_root(a, b, c)
        if c > 0 and fy == 0:
            return y if largest else min(_quadratic_root(a, b, c), y)
        raise ZeroConditionError("d = 0 needs f(y) <= 0 (c <= 0) or f(y) < 0 (c > 0)")
    if c <= 0 and fy < 0:
        return brentq(lambda x: _f(a, b, c, d, y, x), 0.0, y, xtol=1e-14, maxiter=500)
    raise ZeroConditionError("d != 0 needs c <= 0 and f(y) < 0")


# ---------------------------------------------------------------------------
# transformed function


@dataclass(frozen=True)
class HValue:
    value: float
    h1: float | None = None
    h2: float | None = None
    h3: float | None = None


def _noise_split(p_vals, eta0):
    """(G, H): coefficients of (y-x)^2 and (y-x) in |f|^2 / x^2."""
    g11, g12, g21 = p_vals["g11"], p_vals["g12"], p_vals["g21"]
    if eta0 == 1.0:
        return (g11 + g12) ** 2 + g21 ** 2, 0.0
    return g11 ** 2, g12 ** 2 + g21 ** 2


def h_eval(model: GeneralModel, t, x, y, stats: MeasureStats) -> HValue:
    """h(t, x, y, law) = sum_i b_i x^(i-1) - |f(t, x, y - x)|^2 / (2 x^2).

    For the representative family the factored closed form is used, which is
    exact at x = y, and the h1, h2, h3 parts are reported too.
    """
    p = model.family
    if p is None:
        if not 0 < x <= y:
            raise ValueError("general form needs 0 < x <= y")
        b = [c(t, y, stats) for c in model.coeffs]
        f = model.diffusion.evaluate(t, x, y)
        drift = sum(bi * x ** (i - 1) for i, bi in enumerate(b))
        return HValue(float(drift - float((f * f).sum()) / (2 * x * x)))

    v = p.at(t)
    if x < 0 or x > y:
        raise ValueError("need 0 <= x <= y")
    if x == 0 and v["beta0"] != 0:
        raise ValueError("h at x = 0 needs beta0 = 0")
    E = stats.mean
    G, H = _noise_split(v, p.eta0)
    mg = v["mu"] + v["gamma"]
    gap = y - x
    cross = v["g11"] * v["g12"] * gap ** 1.5 if p.eta0 == 0.5 else 0.0
    infect = v["beta"] + v["beta1"] * E / y + v["c12"] * (y + x) + (v["c21"] + v["c22"] * y) * x
    if v["beta0"] != 0:
        infect += v["beta0"] * E / x
    value = -mg + gap * infect - 0.5 * G * gap * gap - 0.5 * H * gap - cross

    b1 = -mg + (v["beta1"] - v["beta0"]) * E + v["beta"] * y + v["c12"] * y * y
    b2 = -v["beta1"] * E / y - v["beta"] + v["c21"] * y + v["c22"] * y * y
    b3 = -(v["c12"] + v["c21"] + v["c22"] * y)
    h1 = b1 - 0.5 * H * y - 0.5 * G * y * y
    h2 = b2 + 0.5 * H + G * y
    h3 = b3 - 0.5 * G
    return HValue(float(value), h1, h2, h3)


# ---------------------------------------------------------------------------
# limits and reports


@dataclass(frozen=True)
class LimitData:
    """Limits of the representative coefficients as t -> infinity.

    uI, vI are the interaction corrections (0 by default); mInf, when set, is
    the limit of beta1 * E[I] and pins m_I = n_I = mInf / Ninf.
    """

    Ninf: float
    muinf_plus_gammainf: float
    betainf: float
    beta1inf: float = 0.0
    beta0inf: float = 0.0
    c12inf: float = 0.0
    c21inf: float = 0.0
    c22inf: float = 0.0
    g11inf: float = 0.0
    g12inf: float = 0.0
    g21inf: float = 0.0
    eta0: float = 1.0
    uI: float = 0.0
    vI: float = 0.0
    mInf: float | None = None

    def __post_init__(self):
        if self.Ninf < 0 or self.muinf_plus_gammainf < 0:
            raise ValueError("Ninf and mu+gamma limits must be nonnegative")
        if self.uI < 0 or self.vI < 0:
            raise ValueError("uI and vI must be nonnegative")
        if self.eta0 not in (0.5, 1.0):
            raise ValueError("eta0 must be 1/2 or 1")
        if self.mInf is not None and self.Ninf > 0:
            m = self.mInf / self.Ninf
            if not -_neg(self.beta1inf) - 1e-12 <= m <= _pos(self.beta1inf) + 1e-12:
                raise ValueError("mInf / Ninf must lie in [-beta1^-, beta1^+]")

    @classmethod
    def from_params(cls, p: RepresentativeParams, **overrides):
        def lim(name, tf):
            if tf.limit is None:
                raise ValueError(f"missing limit for {name}; supply LimitData explicitly")
            return tf.limit

        mg = lim("mu", p.mu) + lim("gamma", p.gamma)
        data = cls(Ninf=lim("N", p.N.N), muinf_plus_gammainf=mg, betainf=lim("beta", p.beta),
                   beta1inf=lim("beta1", p.beta1), beta0inf=lim("beta0", p.beta0),
                   c12inf=lim("c12", p.c12), c21inf=lim("c21", p.c21), c22inf=lim("c22", p.c22),
                   g11inf=lim("g11", p.g11), g12inf=lim("g12", p.g12), g21inf=lim("g21", p.g21),
                   eta0=p.eta0)
        return replace(data, **overrides) if overrides else data

    @classmethod
    def from_model(cls, model: GeneralModel, **overrides):
        if model.family is None:
            raise ValueError("limits are only defined for the representative family")
        return cls.from_params(model.family, **overrides)

    @property
    def half(self):
        return self.eta0 == 0.5

    @property
    def G(self):
        if self.half:
            return self.g11inf ** 2
        return (self.g11inf + self.g12inf) ** 2 + self.g21inf ** 2

    @property
    def H(self):
        return self.g12inf ** 2 + self.g21inf ** 2 if self.half else 0.0

    @property
    def cross(self):
        return self.g11inf * self.g12inf if self.half else 0.0


@dataclass(frozen=True)
class Verdict:
    kind: str  # Extinct | PersistAbove | PersistAround | Inconclusive
    rate: float | None = None
    h_inf: float | None = None
    level: float | None = None
    reason: str = ""


@dataclass(frozen=True)
class AsymptoticReport:
    verdict: Verdict
    reproductionRatio: float | None = None
    details: dict = field(default_factory=dict)

    def as_lines(self, prefix=""):
        out = [f"{prefix}verdict = {self.verdict.kind}"]
        for k in ("rate", "h_inf", "level"):
            v = getattr(self.verdict, k)
            if v is not None:
                out.append(f"{prefix}{k} = {v!r}")
        if self.verdict.reason:
            out.append(f"{prefix}reason = {self.verdict.reason}")
        if self.reproductionRatio is not None:
            out.append(f"{prefix}reproduction_ratio = {self.reproductionRatio!r}")
        for k, v in self.details.items():
            out.append(f"{prefix}{k} = {v!r}" if not isinstance(v, str) else f"{prefix}{k} = {v}")
        return out


FAMILIES = {"M.1": "wang", "wang": "wang", "M.2": "cai", "cai": "cai",
            "M.3": "bernardi", "bernardi": "bernardi", "simulated": "gghmp",
            "gghmp": "gghmp", "representative": "representative"}


def _family(name):
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}") from None


def _strict_neg(u, *terms):
    """u < 0 beyond rounding noise of the terms that produced it."""
    scale = sum(abs(t) for t in terms) + abs(u)
    return u < -1e-12 * max(scale, 1.0)


def h_limit(L: LimitData):
    """Limit of h as t -> infinity, x -> 0 and the law -> point mass at 0."""
    N = L.Ninf
    return (-L.muinf_plus_gammainf + L.betainf * N + L.c12inf * N * N
            - 0.5 * L.H * N - 0.5 * L.G * N * N - L.cross * N ** 1.5)


def extinction_report(L: LimitData, family: str = "representative") -> AsymptoticReport:
    """Extinction verdict from the applicable upper bounds on h.

    Routes: the quadratic-penalty bound (needs the A.2 inequality), the
    square-root-noise bound with its four scenarios, the bound used when A.2
    fails, and a direct maximisation of the limiting upper envelope of h over
    [0, Ninf].  Extinct as soon as one applicable route gives u < 0.
    """
    fam = _family(family)
    if L.beta0inf != 0:
        return AsymptoticReport(Verdict("Inconclusive", reason="beta0 must vanish in the limit"))
    N, mg = L.Ninf, L.muinf_plus_gammainf
    beta, b1 = L.betainf, L.beta1inf
    c12, c21, c22 = L.c12inf, L.c21inf, L.c22inf
    G, H, cross = L.G, L.H, L.cross
    g11 = L.g11inf

    hinf = h_limit(L)
    h0 = hinf + mg
    ratio = (h0 + _pos(b1) * N) / mg if mg > 0 else None
    a2 = c12 + c21 + c22 * N > -0.5 * G
    routes = {}

    # quadratic penalty bound
    if a2 and (not L.half or cross == 0):
        u1 = beta + _pos(b1) - 0.5 * H
        u2 = _neg(b1) - beta + 0.5 * H
        u4 = c12 + c21 + c22 * N + 0.5 * G
        if u2 >= (2 * c12 + c21) * N + c22 * N * N:
            u = -mg
            terms = (mg,)
        else:
            pen = _pos(u2 + (c21 + G) * N + c22 * N * N)
            terms = (mg, L.uI, u1 * N, (c12 - 0.5 * G) * N * N, 0.25 * pen * pen / u4)
            u = -(mg + L.uI) + u1 * N + (c12 - 0.5 * G) * N * N + 0.25 * pen * pen / u4
        routes["quadratic_penalty"] = (u, _strict_neg(u, *terms))

    # square-root noise bound
    scen = {}
    if L.half:
        sq = math.sqrt(N)
        lhs = 0.5 * (L.g12inf ** 2 + L.g21inf ** 2)
        top = beta + _pos(b1) + (2 * c12 + c21) * N + c22 * N * N
        scen["i"] = lhs >= top and cross >= 0
        scen["ii"] = -1.5 * cross >= 4 * (c12 + c21 + c22 * N + 0.5 * g11 ** 2) * sq
        scen["iii"] = lhs <= beta - _neg(b1) - (1.5 * cross + (c21 + g11 ** 2) * sq + c22 * N ** 1.5) * sq
        den = 0.5 * g11 ** 2 + c12 + c21 + c22 * N
        scen["iv"] = bool(g11 > 0 and den > 0
                          and lhs >= top + 0.5 * (0.75 ** 2) * g11 ** 2 * L.g12inf ** 2 / den)
        plain = c12 == c21 == c22 == g11 == 0
        if (plain or (a2 and any(scen.values()))) and mg > 0:
            u1 = beta + _pos(b1) - 0.5 * H
            u3 = c12 - 0.5 * g11 ** 2
            lhs10 = (u1 + u3 * N - cross * math.sqrt(N)) * N
            routes["sqrt_noise"] = (lhs10 - mg, _strict_neg(lhs10 - mg, lhs10, mg))

    # A.2 fails
    if not a2 and (not L.half or cross == 0):
        u1 = beta + _pos(b1) - 0.5 * H
        u2 = c12 - 0.5 * G
        lhs = _pos(u1 + u2 * N) * N
        u = lhs - (mg + L.uI)
        routes["no_a2"] = (u, _strict_neg(u, lhs, mg, L.uI))

    # envelope of h with beta1 E[I] / N replaced by its upper bound
    mtop = _pos(b1) - (L.uI / N if N > 0 else 0.0)
    ea = -mg + (beta + mtop) * N + c12 * N * N - 0.5 * H * N - 0.5 * G * N * N
    eb = -beta - mtop + (c21 + c22 * N) * N + 0.5 * H + G * N
    ec = -(c12 + c21 + c22 * N) - 0.5 * G
    u_env, _ = max_power_sum(ea, eb, ec, -cross, N)
    routes["envelope"] = (u_env, _strict_neg(u_env, mg, (beta + mtop) * N, 0.5 * G * N * N,
                                             c12 * N * N, 0.5 * H * N))

    details = {"family": fam, "h_inf": hinf, "h0_inf": h0, "a2": a2,
               "ratio_condition": h0 + _pos(b1) * N < mg}
    for k, v in scen.items():
        details[f"scenario_{k}"] = v
    for name, (u, ok) in routes.items():
        details[f"u_{name}"] = u
    fired = [name for name, (u, ok) in routes.items() if ok]
    if fired:
        details["governing_route"] = fired[0]
        return AsymptoticReport(Verdict("Extinct", rate=1.0, h_inf=hinf), ratio, details)
    return AsymptoticReport(Verdict("Inconclusive", reason="no applicable bound is negative"),
                            ratio, details)


def persistence_coefficients(L: LimitData, x, y):
    """(a, b, c, d) and (a_hat, b_hat, c_hat, d_hat) of the two auxiliary functions.

    f(z) = a + b z + c z^2 - d (N - z)^{3/2}, g likewise with hats.
    """
    N, mg = L.Ninf, L.muinf_plus_gammainf
    b1p, b1m = _pos(L.beta1inf), _neg(L.beta1inf)
    G, H = L.G, L.H
    u1 = L.betainf + b1p - 0.5 * H
    v1 = L.betainf - b1m - 0.5 * H
    v2 = L.c12inf - 0.5 * G
    v3 = L.c21inf + G
    uI = N * (b1p - x)
    vI = N * (b1m + y)
    a = -mg + vI + v1 * N + v2 * N * N
    b = -u1 + uI / N + v3 * N + L.c22inf * N * N
    c = -v2 - v3 - L.c22inf * N
    ah = a - uI - vI + (u1 - v1) * N
    bh = b + u1 - v1 - (uI + vI) / N
    d = L.cross
    return (a, b, c, d), (ah, bh, c, d)


def persistence_levels(L: LimitData, family: str = "representative", x=None, y=None) -> AsymptoticReport:
    """Lower persistence level x0 (and upper level y0 for the liminf) from the limits.

    Without mInf the admissible choices are x = beta1^+ and y = -beta1^-; with
    mInf both default to mInf / Ninf.
    """
    fam = _family(family)
    if L.beta0inf != 0:
        return AsymptoticReport(Verdict("Inconclusive", reason="beta0 must vanish in the limit"))
    N, mg = L.Ninf, L.muinf_plus_gammainf
    if not N > 0:
        return AsymptoticReport(Verdict("Inconclusive", reason="Ninf must be positive"))
    b1p, b1m = _pos(L.beta1inf), _neg(L.beta1inf)
    if L.mInf is not None:
        mI = nI = L.mInf / N
    else:
        mI, nI = b1p, -b1m
    x = mI if x is None else x
    y = nI if y is None else y
    eps = 1e-12
    if not mI - eps <= x <= b1p + eps:
        return AsymptoticReport(Verdict("Inconclusive", reason=f"x = {x!r} outside [m_I, beta1^+]"))
    if not -b1m - eps <= y <= nI + eps:
        return AsymptoticReport(Verdict("Inconclusive", reason=f"y = {y!r} outside [-beta1^-, n_I]"))

    (a, b, c, d), (ah, bh, ch, dh) = persistence_coefficients(L, x, y)
    details = {"family": fam, "x": x, "y": y, "a_inf": a, "b_inf": b, "c_inf": c, "d_inf": d,
               "a_hat": ah, "b_hat": bh, "c_hat": ch, "d_hat": dh}
    x0 = y0 = None
    why = []
    if a > d * N ** 1.5:
        try:
            x0 = zero_of_f(a, b, c, -d, N)
        except ZeroConditionError as err:
            why.append(f"lower level: {err}")
    else:
        why.append("a_inf > d_inf Ninf^(3/2) fails")
    if ah >= dh * N ** 1.5 and ah + bh * N + ch * N * N < 0:
        if ah > dh * N ** 1.5:
            try:
                y0 = zero_of_f(ah, bh, ch, -dh, N, largest=True)
            except ZeroConditionError as err:
                why.append(f"upper level: {err}")
        else:
            y0 = 0.0
    details["x0"] = x0
    details["y0"] = y0

    if x0 is not None and x == y and y0 is not None and mg > 0:
        return AsymptoticReport(Verdict("PersistAround", level=x0), None, details)
    if x0 is not None:
        return AsymptoticReport(Verdict("PersistAbove", level=x0), None, details)
    return AsymptoticReport(Verdict("Inconclusive", reason="; ".join(why)), None, details)


def limits_for(model: GeneralModel, **overrides) -> LimitData:
    try:
        return LimitData.from_model(model, **overrides)
    except ValueError as err:
        raise ModelError(str(err)) from None
