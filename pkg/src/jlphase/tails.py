"""Exact tail probabilities of the split statistic s.

The CDF of the density B f(s) is the regularized incomplete beta function
I_t(k/2, (d-k)/2).  ``cdf`` evaluates it with the continued fraction in
:mod:`jlphase.special`; ``tail_quadrature`` integrates B f(s) directly and
shares no code with that path, so agreement between the two is evidence for
the identity rather than an assumption of it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import rng as rngmod
from .errors import DomainError, NumericError
from .special import log_betainc
from .sphere import SplitParams, log_B, sample_sphere_batch

CF_ABS_ERROR = 1e-12
QUAD_TOL = 1e-10


class Side(str, enum.Enum):
    ABOVE = "above"
    BELOW = "below"


class Method(str, enum.Enum):
    CLOSED = "closed"
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class TailQuery:
    params: SplitParams
    eps: float

    def __post_init__(self):
        if not (isinstance(self.eps, (int, float, np.floating)) and self.eps > 0 and math.isfinite(self.eps)):
            raise DomainError(f"eps must be a positive finite real, got {self.eps!r}")

    @property
    def upper_threshold(self) -> float:
        return min(1.0, self.params.s0 * (1.0 + self.eps))

    @property
    def lower_threshold(self) -> float:
        return max(0.0, self.params.s0 * (1.0 - self.eps))


@dataclass(frozen=True)
class TailProbabilities:
    """P[s > s0(1+eps)] and P[s < s0(1-eps)].

    ``abs_error_estimate`` is 1e-12 for the continued fraction, the summed
    QUADPACK error estimate for quadrature, and the larger binomial standard
    error of the two fractions for Monte Carlo.
    """

    above: float
    below: float
    method: Method
    abs_error_estimate: float

    @property
    def total(self) -> float:
        return self.above + self.below


def query(k: int, d: int, eps: float) -> TailQuery:
    return TailQuery(SplitParams(k, d), eps)


# -- closed form (continued fraction) -------------------------------------

def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError("cdf argument must lie in [0, 1]")
    return t


def log_cdf(params: SplitParams, t):
    lo, _ = log_betainc(params.a, params.b, _check_t(t))
    return lo if np.ndim(t) else float(lo[0])


def log_sf(params: SplitParams, t):
    """log P[s > t]."""
    _, up = log_betainc(params.a, params.b, _check_t(t))
    return up if np.ndim(t) else float(up[0])


def cdf(params: SplitParams, t):
    """P[s <= t]; accepts a scalar or an array of t."""
    lo, _ = log_betainc(params.a, params.b, _check_t(t))
    out = np.exp(lo)
    return out if np.ndim(t) else float(out[0])


def log_tail_above(q: TailQuery) -> float:
    return log_sf(q.params, q.upper_threshold)


def log_tail_below(q: TailQuery) -> float:
    return log_cdf(q.params, q.lower_threshold)


def tail_above(q: TailQuery) -> float:
    return math.exp(log_tail_above(q))


def tail_below(q: TailQuery) -> float:
    return math.exp(log_tail_below(q))


def certified_tail_floor(q: TailQuery) -> float:
    return min(tail_above(q), tail_below(q))


def log_certified_tail_floor(q: TailQuery) -> float:
    return min(log_tail_above(q), log_tail_below(q))


def failure_probability(q: TailQuery) -> float:
    """tail_above + tail_below: the failure probability of the orthogonal construction."""
    return tail_above(q) + tail_below(q)


# -- quadrature oracle ----------------------------------------------------

def _xlog(c: float, x):
    """c * log(x) with the convention 0 * log(0) = 0."""
    if c == 0.0:
        return np.zeros_like(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        return c * np.log(x)


def _xlog1p(c: float, x):
    if c == 0.0:
        return np.zeros_like(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        return c * np.log1p(x)


def _breakpoints(params: SplitParams, lo: float, hi: float) -> list[float]:
    a, b = params.a, params.b
    n = a + b
    mean = a / n
    sd = math.sqrt(a * b / (n * n * (n + 1.0)))
    centre = (a - 1.0) / (n - 2.0) if a > 1.0 and b > 1.0 else mean
    pts = {lo, hi}
    for j in (0, 1, 2, 3, 5, 8, 12, 18, 27, 40):
        for sgn in (-1.0, 1.0):
            p = centre + sgn * j * sd
            if lo < p < hi:
                pts.add(p)
    return sorted(pts)


def integrate_density(params: SplitParams, lo: float, hi: float) -> tuple[float, float]:
    """Integral of B f(s) over [lo, hi] by adaptive Gauss-Kronrod, with error estimate.

    The integrand is evaluated as exp(log B f(s) - log M), M the maximum of
    B f on the piece, so nothing overflows at large d.  Integrable
    singularities at s = 0 (k = 1) or s = 1 (d - k = 1) are removed by the
    substitutions s = w^2 and s = 1 - w^2.
    """
    if not 0.0 <= lo <= hi <= 1.0:
        raise DomainError(f"integration limits must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
    if lo == hi:
        return 0.0, 0.0
    alpha = (params.k - 2) / 2.0
    beta = (params.d - params.k - 2) / 2.0
    lb = log_B(params)
    total, err = [], []
    pts = _breakpoints(params, lo, hi)
    for x0, x1 in zip(pts[:-1], pts[1:]):
        if x0 == 0.0 and alpha < 0.0:
            # s = w^2, ds = 2w dw
            def logg(w, _a=alpha, _b=beta):
                return math.log(2.0) + _xlog(2.0 * _a + 1.0, w) + _xlog1p(_b, -w * w)
            w0, w1 = 0.0, math.sqrt(x1)
            grid = np.linspace(w0, w1, 65)[1:]
        elif x1 == 1.0 and beta < 0.0:
            # s = 1 - w^2
            def logg(w, _a=alpha, _b=beta):
                return math.log(2.0) + _xlog1p(_a, -w * w) + _xlog(2.0 * _b + 1.0, w)
            w0, w1 = 0.0, math.sqrt(1.0 - x0)
            grid = np.linspace(w0, w1, 65)[1:]
        else:
            def logg(w, _a=alpha, _b=beta):
                return _xlog(_a, w) + _xlog1p(_b, -w)
            w0, w1 = x0, x1
            grid = np.linspace(w0, w1, 65)
            if w0 == 0.0 and alpha > 0.0:
                grid = grid[1:]
            if w1 == 1.0 and beta > 0.0:
                grid = grid[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = logg(grid)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            continue
        log_m = float(vals.max())

        def integrand(w, _logg=logg, _m=log_m):
            with np.errstate(divide="ignore", invalid="ignore"):
                v = _logg(w) - _m
            return math.exp(v) if v == v else 0.0

        val, e, info = _quad(integrand, w0, w1)
        scale = math.exp(lb + log_m)
        total.append(val * scale)
        err.append(e * scale)
        if info:
            raise NumericError(
                "quadrature did not converge",
                k=params.k, d=params.d, lo=x0, hi=x1, message=info,
            )
    value = math.fsum(total)
    abs_err = math.fsum(err)
    if abs_err > QUAD_TOL:
        raise NumericError(
            "quadrature error estimate exceeds tolerance",
            k=params.k, d=params.d, lo=lo, hi=hi, abs_err=abs_err, tol=QUAD_TOL,
        )
    return value, abs_err


QUAD_LIMIT = 200


def _quad(fn, a, b):
    val, err, infodict, *rest = integrate.quad(
        fn, a, b, epsabs=1e-14, epsrel=1e-13, limit=QUAD_LIMIT, full_output=1
    )
    # ier codes: only "roundoff prevents the requested tolerance" (2) is benign
    # when the error estimate is still tiny
    msg = rest[0] if rest else ""
    if msg and err > 1e-13:
        return val, err, msg
    return val, err, ""


def tail_quadrature(q: TailQuery, side: Side | str) -> float:
    return tail_quadrature_with_error(q, side)[0]


def tail_quadrature_with_error(q: TailQuery, side: Side | str) -> tuple[float, float]:
    side = Side(side)
    if side is Side.ABOVE:
        return integrate_density(q.params, q.upper_threshold, 1.0)
    return integrate_density(q.params, 0.0, q.lower_threshold)


# -- bundled evaluation ---------------------------------------------------

def tail_probabilities(
    q: TailQuery,
    method: Method | str = Method.CLOSED,
    n: int = 100_000,
    seed: int = rngmod.DEFAULT_SEED,
) -> TailProbabilities:
    method = Method(method)
    if method is Method.CLOSED:
        return TailProbabilities(tail_above(q), tail_below(q), method, CF_ABS_ERROR)
    if method is Method.QUADRATURE:
        above, ea = tail_quadrature_with_error(q, Side.ABOVE)
        below, eb = tail_quadrature_with_error(q, Side.BELOW)
        return TailProbabilities(above, below, method, ea + eb)
    return tail_monte_carlo(q, n, seed)


def tail_monte_carlo(q: TailQuery, n: int, seed: int) -> TailProbabilities:
    """Fractions of uniform sphere points whose split statistic falls in each tail."""
    k, d = q.params.k, q.params.d
    hi, lo = q.params.s0 * (1.0 + q.eps), q.params.s0 * (1.0 - q.eps)

    def run(rng, m):
        x = sample_sphere_batch(d, m, rng)
        s = np.einsum("ij,ij->i", x[:, :k], x[:, :k])
        return int(np.count_nonzero(s > hi)), int(np.count_nonzero(s < lo))

    counts = rngmod.chunked(n, seed, (rngmod.KEY_TAIL_MC, k, d), run)
    above = sum(c[0] for c in counts) / n
    below = sum(c[1] for c in counts) / n
    se = max(math.sqrt(p * (1.0 - p) / n) for p in (above, below))
    return TailProbabilities(above, below, Method.MONTE_CARLO, se)
