"""Log-gamma helpers and the regularized incomplete beta function.

``log_gamma`` delegates to :func:`math.lgamma`, whose CPython implementation
is a Lanczos approximation (g = 6.0247, 13 terms) with relative error below
1e-14 for positive arguments; the test suite checks 1e-13 against mpmath.

The incomplete beta front factor x^a (1-x)^b / B(a, b) is assembled from
Stirling corrections instead of a difference of three log-gammas.  The
naive difference loses about ``1e-16 * lgamma(a + b)`` absolute accuracy,
which at a + b = 5e5 is already ~1e-9 in the tail value.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, NumericError

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

CF_TOL = 1e-15
CF_MAX_ITER = 500
_TINY = 1e-300

# Bernoulli-number coefficients of the Stirling series 1/(12z) - 1/(360z^3) + ...
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)


def log_gamma(x: float) -> float:
    if not x > 0:
        raise DomainError(f"log_gamma needs a positive argument, got {x!r}")
    return math.lgamma(x)


def stirling_correction(z: float) -> float:
    """``lgamma(z) - [(z - 1/2) log z - z + log(2 pi)/2]`` for z > 0."""
    if not z > 0:
        raise DomainError(f"stirling_correction needs z > 0, got {z!r}")
    if z < 10.0:
        return math.lgamma(z) - ((z - 0.5) * math.log(z) - z + HALF_LOG_2PI)
    zi = 1.0 / z
    zi2 = zi * zi
    acc = 0.0
    for c in reversed(_STIRLING):
        acc = acc * zi2 + c
    return acc * zi


def log_beta_front(a: float, b: float, x):
    """log of x^a (1-x)^b / B(a, b) for x in (0, 1), vectorized over x."""
    x = np.asarray(x, dtype=float)
    n = a + b
    u = x * n - a  # deviation from the mean, scaled by a + b
    core = 0.5 * math.log(a * b / n) - HALF_LOG_2PI
    corr = stirling_correction(n) - stirling_correction(a) - stirling_correction(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        return core + corr + a * np.log1p(u / a) + b * np.log1p(-u / b)


def log1mexp(y):
    """log(1 - exp(y)) for y <= 0, stable on both ends."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    near = y > -math.log(2.0)
    with np.errstate(divide="ignore"):
        out[near] = np.log(-np.expm1(y[near]))
        out[~near] = np.log1p(-np.exp(y[~near]))
    return out


def _lentz(a: float, b: float, x: np.ndarray) -> tuple[np.ndarray, int]:
    """Continued fraction for I_x(a, b) * a / front, modified Lentz scheme."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        for aa in (
            m * (b - m) * x / ((qam + m2) * (a + m2)),
            -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2)),
        ):
            d = 1.0 + aa * d
            d = np.where(np.abs(d) < _TINY, _TINY, d)
            c = 1.0 + aa / c
            c = np.where(np.abs(c) < _TINY, _TINY, c)
            d = 1.0 / d
            delta = d * c
            h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= CF_TOL
        if not active.any():
            return h, m
    raise NumericError(
        "incomplete beta continued fraction did not converge",
        a=a,
        b=b,
        max_iter=CF_MAX_ITER,
        worst_x=float(x[active][0]),
        unconverged=int(active.sum()),
    )


def log_betainc(a: float, b: float, x):
    """Return ``(log I_x(a, b), log(1 - I_x(a, b)))`` as float arrays.

    The side that the continued fraction evaluates directly is accurate to
    relative precision even when it underflows in linear scale; the other
    side is formed with ``log1mexp``.  The fraction is evaluated for
    ``I_x(a, b)`` when x is at or below the mean a/(a+b) and for
    ``I_{1-x}(b, a)`` otherwise.
    """
    if not (a > 0 and b > 0):
        raise DomainError(f"incomplete beta needs a, b > 0, got a={a!r}, b={b!r}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.isnan(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("incomplete beta argument must lie in [0, 1]")
    lo = np.empty_like(x)
    up = np.empty_like(x)
    lo[x == 0.0], up[x == 0.0] = -np.inf, 0.0
    lo[x == 1.0], up[x == 1.0] = 0.0, -np.inf

    mean = a / (a + b)
    inner = (x > 0.0) & (x < 1.0)
    direct = inner & (x <= mean)
    swapped = inner & (x > mean)
    if direct.any():
        xs = x[direct]
        h, _ = _lentz(a, b, xs)
        lo[direct] = log_beta_front(a, b, xs) + np.log(h) - math.log(a)
        up[direct] = log1mexp(np.minimum(lo[direct], 0.0))
    if swapped.any():
        xs = x[swapped]
        h, _ = _lentz(b, a, 1.0 - xs)
        up[swapped] = log_beta_front(a, b, xs) + np.log(h) - math.log(b)
        lo[swapped] = log1mexp(np.minimum(up[swapped], 0.0))
    return lo, up
