"""Explicit moment, comparison and strong error bounds.

Every bound takes a hat provider: a callable ``hats(s, y=None)`` returning
the HatCoeffs at time s (population level y, default N(s)).  A plain
HatCoeffs is accepted for time-constant coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.integrate import quad
from scipy.special import gammaln

from .model import GeneralModel, HatCoeffs, hat_coefficients

_QUAD = dict(epsabs=1e-12, epsrel=1e-10, limit=200)


class BoundError(ValueError):
    pass


class HatProvider:
    """Hat coefficients of a representative-family model as a function of time."""

    def __init__(self, model: GeneralModel, bbar=None, lam0=0.0):
        self.model = model
        self.bbar = bbar
        self.lam0 = lam0
        fam = model.family
        self.n_constant = model.N.is_constant
        self.constant = bool(model.N.is_constant and fam is not None and all(
            getattr(fam, n).is_constant for n in fam.coefficient_names()))
        self._cache = {}

    def N(self, s):
        return self.model.N(s)

    def __call__(self, s, y=None):
        key = (0.0 if self.constant else float(s), None if y is None else float(y))
        hc = self._cache.get(key)
        if hc is None:
            hc = hat_coefficients(self.model, s, self.bbar, self.lam0, y)
            if len(self._cache) < 4096:
                self._cache[key] = hc
        return hc


class _Fixed:
    constant = True
    n_constant = True

    def __init__(self, hc: HatCoeffs):
        self.hc = hc

    def N(self, s):
        return self.hc.y

    def __call__(self, s, y=None):
        if y is not None and y != self.hc.y:
            raise BoundError("fixed HatCoeffs cannot be re-evaluated at another population level")
        return self.hc


def _provider(hats):
    return _Fixed(hats) if isinstance(hats, HatCoeffs) else hats


def _exp(v):
    return math.inf if v > 709.0 else math.exp(v)


def _integral(f, a, b):
    if b <= a:
        return 0.0
    if b - a < 1e-9:
        # midpoint rule; quad misbehaves on (sub)normal-width intervals
        return f(0.5 * (a + b)) * (b - a)
    val, _ = quad(f, a, b, **_QUAD)
    if not math.isfinite(val):
        raise BoundError("non-finite integrand")
    return val


def _growth_bound(rate, source, t, start):
    """e^{int_0^t rate} start + int_0^t e^{int_s^t rate} source(s) ds."""
    if t < 0:
        raise BoundError("t must be nonnegative")
    R = lambda s: _integral(rate, 0.0, s)  # noqa: E731
    total = R(t)
    inner = _integral(lambda s: math.exp(min(total - R(s), 709.0)) * source(s), 0.0, t)
    return _exp(total) * start + inner


def first_moment_bound(hats, t, Exi0):
    """Upper bound on E[I_t] from the affine growth of the drift."""
    h = _provider(hats)
    return _growth_bound(lambda s: h(s).bhat5, lambda s: h(s).bhat[0], t, Exi0)


def _cp(p):
    return (p - 1) / 2.0


def _need_l(hc):
    if hc.l is None:
        raise BoundError("diffusion growth coefficient l unavailable (non-Lipschitz noise)")
    return hc.l


def pth_moment_bound(hats, p, t, Exi0p):
    """Upper bound on E[I_t^p], p >= 2."""
    if p < 2:
        raise BoundError("p must be >= 2")
    h = _provider(hats)
    cp = _cp(p)

    def rate(s):
        hc = h(s)
        return (p - 1) * hc.bhat[0] + p * (hc.bhat5 + cp * _need_l(hc) ** 2)

    return _growth_bound(rate, lambda s: h(s).bhat[0], t, Exi0p)


def comparison_bound(hats, p, t, Edelta0):
    """Bound on E|I_t - J_t|^p for two solutions started E|I_0 - J_0|^p = Edelta0 apart."""
    if p != 1 and p < 2:
        raise BoundError("comparison bound needs p = 1 or p >= 2")
    if t < 0:
        raise BoundError("t must be nonnegative")
    h = _provider(hats)
    if p == 1:
        rate = lambda s: h(s).bhat4 + h(s).lamhat4  # noqa: E731
    else:
        cp = _cp(p)

        def rate(s):
            hc = h(s)
            if hc.lam is None:
                raise BoundError("diffusion Lipschitz coefficient unavailable")
            return p * (hc.bhat4 + hc.lamhat4 + cp * hc.lam ** 2)
    return _exp(_integral(rate, 0.0, t)) * Edelta0


def _check_step(grid, j):
    if not 0 <= j < grid.steps:
        raise BoundError(f"step index {j} out of range [0, {grid.steps})")


def em_moment_constants(hats, grid, p, j):
    """(k, l, max bhat_0) over the nodes t_0..t_j."""
    _check_step(grid, j)
    h = _provider(hats)
    cp = _cp(p)
    k = l = b0 = -math.inf
    nodes = grid.times[:1] if getattr(h, "constant", False) else grid.times[: j + 1]
    for ti in nodes:
        hc = h(float(ti))
        lsq = _need_l(hc) ** 2
        k = max(k, (p - 1) * hc.bhat[0] + p * (hc.bhat_k3 + cp * lsq))
        l = max(l, 2 * (p - 1) * (hc.bhat[0] + cp * lsq) + (2 * p - 1) * hc.bhat_k3)
        b0 = max(b0, hc.bhat[0])
    return k, l, b0


def em_moment_bound(hats, grid, p, j, t, Exi0p):
    """Bound on E|I^_t|^p for the interpolated scheme, t in [t_j, t_{j+1}]."""
    _check_step(grid, j)
    if not grid.times[j] <= t <= grid.times[j + 1]:
        raise BoundError("t must lie in the j-th step")
    k, l, b0 = em_moment_constants(hats, grid, p, j)
    return _exp(k * t) * Exi0p + _exp(l * t) * t * b0


def chi_factor(d, p):
    """E[(Z_1^2 + ... + Z_d^2)^{p/2}]^{1/p} for independent standard normals."""
    logm = 0.5 * p * math.log(2.0) + gammaln((d + p) / 2.0) - gammaln(d / 2.0)
    return math.exp(logm / p)


def em_increment_bound(hats, grid, p, j, d=1):
    """m_{p,j}: E|I^_t - I_{t_j}|^p <= m^p (t - t_j)^{p/2}."""
    _check_step(grid, j)
    h = _provider(hats)
    tj = float(grid.times[j])
    hc = h(tj)
    y = hc.y
    return math.sqrt(grid.T) * (hc.bhat[0] + hc.bhat_k3 * y) + chi_factor(d, p) * _need_l(hc) * y


@dataclass(frozen=True)
class StrongErrorBound:
    value: float                 # bound on max_l E|I^_t - I_t|^p
    lambda_integral: float
    delta_integral: float
    interaction_integral: float
    rate_constant: float | None = None   # c_{p,q,alpha}
    rate_bound: float | None = None      # c_{p,q,alpha} |T_n|^alpha (an L^p norm bound)
    alpha: float | None = None
    c_pq: float | None = None


def _bbar_sum(hc, y):
    return sum(b * y ** i for i, b in enumerate(hc.bbar))


def _deriv_env(hc, y):
    return sum(i * b * y ** (i - 1) for i, b in enumerate(hc.babs) if i >= 1)


def _lam_at(h, s, Y):
    hc = h(s, Y)
    if hc.lam is None:
        raise BoundError("diffusion Lipschitz coefficient unavailable")
    return hc.lam


class _ErrorCoefficients:
    """Per-step error coefficients, each step using its own left node."""

    def __init__(self, hats, grid, p, d):
        self.h = _provider(hats)
        self.grid = grid
        self.p = p
        self.cp = _cp(p)
        self.d = d
        self._m = {}

    def m(self, i):
        if getattr(self.h, "constant", False):
            i = 0
        if i not in self._m:
            self._m[i] = em_increment_bound(self.h, self.grid, self.p, i, self.d)
        return self._m[i]

    def parts(self, i, s):
        h, p, cp = self.h, self.p, self.cp
        ti = float(self.grid.times[i])
        Ni, Ns = h.N(ti), h.N(s)
        Y = max(Ni, Ns)
        hs = h(s)
        hi = h(ti)
        lam_sq = _lam_at(h, s, Y) ** 2
        lam0_sq = hi.lam0 ** 2
        bk1 = _bbar_sum(hi, Ni)
        bk2 = _deriv_env(h(s, Y), Y)
        bk4 = hs.bhat_k4
        d1 = bk1 + 6 * cp * lam0_sq
        d2 = bk1 + bk2 + 1.5 * cp * lam_sq
        d3 = bk4 + 12 * cp * lam_sq
        lam_p = ((p - 1) * (2 * bk1 + bk2) + (2 * p - 1) * bk4
                 + 3 * (p - 2) * cp * lam0_sq + 13 * (p - 1) * cp * lam_sq)
        return ti, Ns, Ni, d1, d2, d3, lam_p, hs.lamhat4

    def lam_hat(self, i, s):
        *_, lam_p, l4 = self.parts(i, s)
        return lam_p + (3 * self.p - 2) * l4

    def delta_hat(self, i, s):
        ti, Ns, Ni, d1, d2, d3, _, l4 = self.parts(i, s)
        m = self.m(i)
        gap = (s - ti) ** (self.p / 2)
        return (d1 + d3 * m ** self.p) * gap + d2 * abs(Ns - Ni) ** self.p + l4 * m ** self.p * gap


def strong_error_bound(hats, grid, p, q, M, c_pq, t=None, d=1, alpha=None, c_alpha=None):
    """Strong L^p error bound of the interpolated particle scheme at time t (default T).

    With ``alpha`` (and the Hoelder constant ``c_alpha`` of N, 0 for constant
    N) the mesh-rate form c_{p,q,alpha} |T_n|^alpha is returned as well.
    """
    if c_pq is None:
        raise BoundError("c_pq must be supplied")
    if c_pq < 0:
        raise BoundError("c_pq must be nonnegative")
    if p < 2:
        raise BoundError("p must be >= 2")
    if not q > 2 * p:
        raise BoundError("need q > 2p")
    if M < 1:
        raise BoundError("M must be positive")
    t = grid.T if t is None else float(t)
    j = grid.locate(t)
    co = _ErrorCoefficients(hats, grid, p, d)
    h = co.h

    def pieces(upto):
        L = D = C = 0.0
        for i in range(grid.locate(upto) + 1):
            a, b = float(grid.times[i]), min(float(grid.times[i + 1]), upto)
            if b <= a:
                continue
            L += _integral(lambda s: co.lam_hat(i, s), a, b)
            D += _integral(lambda s: co.delta_hat(i, s), a, b)
            C += _integral(lambda s: h(s).lamhat4 * h.N(s) ** p, a, b)
        return L, D, C

    L, D, C = pieces(t)
    value = _exp(L) * (D + 2 * c_pq * C / math.sqrt(M))
    rate_c = rate_b = None
    if alpha is not None:
        if not 0 < alpha <= 0.5:
            raise BoundError("alpha must lie in (0, 1/2]")
        if c_alpha is None:
            if not getattr(h, "n_constant", False):
                raise BoundError("Hoelder constant c_alpha of N is required")
            c_alpha = 0.0
        LT, _, CT = pieces(grid.T) if t != grid.T else (L, D, C)
        mesh = grid.mesh
        sup = 0.0
        for i in range(grid.steps):
            a, b = float(grid.times[i]), float(grid.times[i + 1])
            for s in (a, 0.5 * (a + b), b):
                sup = max(sup, co.delta_hat(i, s))
            if getattr(h, "constant", False) and grid.h is not None:
                break
        c_a0 = sup / mesh ** (alpha * p)
        c0 = M * mesh ** (2 * alpha * p)
        c_p = _exp(LT / p)
        rate_c = c_p * (c_a0 * grid.T + 2 * c_pq * CT / math.sqrt(c0)) ** (1.0 / p)
        rate_b = rate_c * mesh ** alpha
    return StrongErrorBound(value, L, D, C, rate_c, rate_b, alpha, c_pq)
