"""Explicit two-sided bounds on the tails of the split statistic.

All bounds are evaluated in log space and exponentiated at the end; each
public function has a ``log_`` twin for parameters whose values underflow.
``log`` is the natural logarithm throughout.

The bounds are only claimed under the standing assumptions

    0 < eps <= 1/2,  0 < delta <= 1/2,  k - 4 >= eps^-2,  s0 = k/d < 0.4,

with k and d even for anything that rests on the bound for B.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath

from .errors import DomainError
from .sphere import SplitParams, log_B, log_density_f
from .tails import TailQuery, log_tail_above, log_tail_below

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2.0 * math.pi)

# log of the prefactors, in the order they appear below
LOG_B_LOWER_CONST = -2.0 - math.log(2.0) - 0.5 * LOG_PI            # e^-2 / (2 sqrt pi)
LOG_B_UPPER_CONST = -1.0 - math.log(2.0) - 0.5 * LOG_PI            # e^-1 / (2 sqrt pi)
LOG_BSF_UPPER_CONST = math.log(9.0) - 1.0 - 0.5 * LOG_2PI          # 9 e^-1 / sqrt(2 pi)
LOG_UPPER_TAIL_LB_CONST = -2.0 - math.log(4.0) - 0.5 * LOG_PI      # e^-2 / (4 sqrt pi)
LOG_UPPER_TAIL_LB_DELTA_CONST = -2.0 - math.log(4.0) - LOG_PI      # e^-2 / (4 pi)
LOG_UPPER_TAIL_UB_CONST = math.log(27.0) - 1.0 - 0.5 * LOG_2PI     # 27 e^-1 / sqrt(2 pi)
LOG_LOWER_TAIL_LB_CONST = LOG_B_LOWER_CONST                          # e^-2 / (2 sqrt pi)
LOG_LOWER_TAIL_UB_CONST = math.log(18.0 * math.sqrt(2.0)) + 0.5 - 0.5 * LOG_PI  # 18 sqrt2 e^1/2 / sqrt pi

UPPER_TAIL_UB_CONST = math.exp(LOG_UPPER_TAIL_UB_CONST)
LOWER_TAIL_UB_CONST = math.exp(LOG_LOWER_TAIL_UB_CONST)
# One constant dominating both upper bounds, as needed by the existence side.
C_EXISTENCE = max(UPPER_TAIL_UB_CONST, LOWER_TAIL_UB_CONST)

SLACK = 1e-12


@dataclass(frozen=True)
class AssumptionSet:
    eps: float
    delta: Optional[float]
    params: SplitParams
    eps_ok: bool
    delta_ok: bool
    k_ok: bool
    s0_ok: bool
    parity_ok: bool

    @property
    def size_ok(self) -> bool:
        """Conditions on eps, k and s0 alone (delta not involved)."""
        return self.eps_ok and self.k_ok and self.s0_ok

    @property
    def holds(self) -> bool:
        return self.size_ok and self.delta_ok

    def failures(self) -> list[str]:
        out = []
        if not self.eps_ok:
            out.append("0 < eps <= 1/2")
        if not self.delta_ok:
            out.append("0 < delta <= 1/2")
        if not self.k_ok:
            out.append("k - 4 >= eps^-2")
        if not self.s0_ok:
            out.append("s0 < 0.4")
        if not self.parity_ok:
            out.append("k and d even")
        return out


def assumptions_hold(eps: float, delta: Optional[float], params: SplitParams) -> AssumptionSet:
    """Evaluate each standing assumption; ``delta=None`` skips the delta check."""
    eps_ok = 0.0 < eps <= 0.5
    delta_ok = True if delta is None else 0.0 < delta <= 0.5
    k_ok = eps > 0.0 and params.k - 4 >= eps ** -2
    return AssumptionSet(
        eps=eps,
        delta=delta,
        params=params,
        eps_ok=eps_ok,
        delta_ok=delta_ok,
        k_ok=k_ok,
        s0_ok=params.s0 < 0.4,
        parity_ok=params.k % 2 == 0 and params.d % 2 == 0,
    )


def _require(cond: bool, what: str):
    if not cond:
        raise DomainError(f"assumption violated: {what}")


def _require_size(eps: float, k: int):
    _require(0.0 < eps <= 0.5, "0 < eps <= 1/2")
    _require(k - 4 >= eps ** -2, "k - 4 >= eps^-2")


def _require_all(eps: float, params: SplitParams, parity: bool = True):
    a = assumptions_hold(eps, None, params)
    _require(a.eps_ok, "0 < eps <= 1/2")
    _require(a.k_ok, "k - 4 >= eps^-2")
    _require(a.s0_ok, "s0 < 0.4")
    if parity:
        _require(a.parity_ok, "k and d even (the bound on B is proven for even parity only)")


# -- Stirling / B ------------------------------------------------------------

def _round_down(x: mpmath.mpf) -> float:
    f = float(x)
    return math.nextafter(f, -math.inf) if mpmath.mpf(f) > x else f


def _round_up(x: mpmath.mpf) -> float:
    f = float(x)
    return math.nextafter(f, math.inf) if mpmath.mpf(f) < x else f


def robbins_log_factorial_bounds(n: int) -> tuple[float, float]:
    """Robbins' bracket on log n!.

    lo = log sqrt(2 pi) + (n + 1/2) log n - n + 1/(12n + 1), hi the same with
    1/(12n).  Evaluated at 40 digits and rounded outward, so the returned
    floats bracket the exact bounds (and hence log n!) even where the two
    differ by less than an ulp.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    with mpmath.workdps(40):
        base = mpmath.log(2 * mpmath.pi) / 2 + (n + mpmath.mpf(1) / 2) * mpmath.log(n) - n
        lo = base + mpmath.mpf(1) / (12 * n + 1)
        hi = base + mpmath.mpf(1) / (12 * n)
        return _round_down(lo), _round_up(hi)


def robbins_correction_bounds(n: int) -> tuple[float, float]:
    """Bracket (1/(12n+1), 1/(12n)) on log n! minus its Stirling main term."""
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return 1.0 / (12 * n + 1), 1.0 / (12 * n)


def _check_b_params(params: SplitParams):
    if params.k % 2 or params.d % 2:
        raise DomainError(f"B bounds need k and d even, got k={params.k}, d={params.d}")
    if params.k < 4 or params.d - params.k < 4:
        raise DomainError(f"B bounds need k >= 4 and d - k >= 4, got k={params.k}, d={params.d}")


def _log_b_core(params: SplitParams) -> float:
    k, d = params.k, params.d
    return 0.5 * (d - 1) * math.log(d - 2) - 0.5 * (k - 1) * math.log(k - 2) - 0.5 * (d - k - 1) * math.log(d - k - 2)


def b_bounds(params: SplitParams) -> tuple[float, float]:
    """(log lower, log upper) bracketing log B for even k, d."""
    _check_b_params(params)
    core = _log_b_core(params)
    return LOG_B_LOWER_CONST + core, LOG_B_UPPER_CONST + core


def log_bsf(params: SplitParams) -> float:
    """log of B s0 f(s0)."""
    s0 = params.s0
    return log_B(params) + math.log(s0) + log_density_f(s0, params)


def log_bsf_bounds(params: SplitParams) -> tuple[float, float]:
    _check_b_params(params)
    _require(params.s0 < 0.4, "s0 < 0.4")
    half_log_k = 0.5 * math.log(params.k)
    return LOG_B_LOWER_CONST + half_log_k, LOG_BSF_UPPER_CONST + half_log_k


def bsf_bounds(params: SplitParams) -> tuple[float, float]:
    """(e^-2/(2 sqrt pi) sqrt k, 9 e^-1/sqrt(2 pi) sqrt k), a bracket on B s0 f(s0)."""
    lo, hi = log_bsf_bounds(params)
    return math.exp(lo), math.exp(hi)


# -- tail bounds ------------------------------------------------------------

def log_upper_tail_lower_bound(params: SplitParams, eps: float) -> float:
    _require_all(eps, params)
    k, s0 = params.k, params.s0
    return LOG_UPPER_TAIL_LB_CONST - 0.25 * (math.sqrt(k) * eps + 1.0) ** 2 * (1.0 + s0) / (1.0 - s0)


def upper_tail_lower_bound(params: SplitParams, eps: float) -> float:
    return math.exp(log_upper_tail_lower_bound(params, eps))


def _check_k_parity(k: int):
    if k % 2:
        raise DomainError(f"tail upper bounds rest on the even-parity bound on B; got odd k={k}")


def log_upper_tail_upper_bound(k: int, eps: float) -> float:
    _require_size(eps, k)
    _check_k_parity(k)
    return LOG_UPPER_TAIL_UB_CONST - (k - 2) / 4.0 * eps * eps * (1.0 - 2.0 * eps / 3.0)


def upper_tail_upper_bound(k: int, eps: float) -> float:
    return math.exp(log_upper_tail_upper_bound(k, eps))


def log_lower_tail_lower_bound(params: SplitParams, eps: float) -> float:
    _require_all(eps, params)
    k, s0 = params.k, params.s0
    quad = (math.sqrt(k) * eps + 1.0) ** 2 / (1.0 - s0)
    cubic = 2.0 * (k ** (1.0 / 3.0) * eps + k ** (-1.0 / 6.0)) ** 3
    return LOG_LOWER_TAIL_LB_CONST - 0.25 * (quad + cubic)


def lower_tail_lower_bound(params: SplitParams, eps: float) -> float:
    return math.exp(log_lower_tail_lower_bound(params, eps))


def _require_lower_ub(k: int, eps: float):
    _require(0.0 < eps <= 0.5, "0 < eps <= 1/2")
    _require(k >= eps ** -2, "k >= eps^-2")
    _check_k_parity(k)


def log_lower_tail_upper_bound(k: int, eps: float) -> float:
    _require_lower_ub(k, eps)
    return LOG_LOWER_TAIL_UB_CONST - k / 4.0 * eps * eps


def lower_tail_upper_bound(k: int, eps: float) -> float:
    return math.exp(log_lower_tail_upper_bound(k, eps))


def log_lower_tail_upper_bound_weak(k: int, eps: float) -> float:
    """The same constant with the upper-tail exponent -((k-2)/4) eps^2 (1 - 2 eps/3)."""
    _require_lower_ub(k, eps)
    return LOG_LOWER_TAIL_UB_CONST - (k - 2) / 4.0 * eps * eps * (1.0 - 2.0 * eps / 3.0)


def lower_tail_upper_bound_weak(k: int, eps: float) -> float:
    return math.exp(log_lower_tail_upper_bound_weak(k, eps))


# -- delta forms ------------------------------------------------------------

def _check_gamma_args(eta: float, delta: float, s0: float):
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
    if not eta > 0.0:
        raise DomainError(f"eta must be positive, got {eta!r}")
    if not 0.0 <= s0 < 0.4:
        raise DomainError(f"s0 must lie in [0, 0.4), got {s0!r}")


def gamma1(eta: float, delta: float, s0: float) -> float:
    _check_gamma_args(eta, delta, s0)
    el = eta * math.log(1.0 / delta)
    return (1.0 + el ** -0.5) ** 2 * (1.0 + s0) / (1.0 - s0)


def gamma2(eta: float, delta: float, eps: float, s0: float) -> float:
    _check_gamma_args(eta, delta, s0)
    if not eps > 0.0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    el = eta * math.log(1.0 / delta)
    return (1.0 + el ** -0.5) ** 2 / (1.0 - s0) + 2.0 * (eps ** (1.0 / 3.0) + el ** (-1.0 / 3.0)) ** 3


def log_upper_tail_lower_bound_delta(eta: float, delta: float, s0: float, sqrt_pi: bool = False) -> float:
    """log of (e^-2/(4 pi)) delta^{eta gamma1 / 4}.

    ``sqrt_pi=True`` uses the prefactor e^-2/(4 sqrt pi) of the non-delta
    form instead; both are valid lower bounds when k <= eta eps^-2 log(1/delta).
    """
    const = LOG_UPPER_TAIL_LB_CONST if sqrt_pi else LOG_UPPER_TAIL_LB_DELTA_CONST
    return const + 0.25 * eta * gamma1(eta, delta, s0) * math.log(delta)


def log_lower_tail_lower_bound_delta(eta: float, delta: float, eps: float, s0: float) -> float:
    """log of (e^-2/(2 sqrt pi)) delta^{eta gamma2 / 4}."""
    return LOG_LOWER_TAIL_LB_CONST + 0.25 * eta * gamma2(eta, delta, eps, s0) * math.log(delta)


# -- report -----------------------------------------------------------------

CSV_HEADER = "k,d,eps,exact_above,lb_above,ub_above,exact_below,lb_below,ub_below,sandwich_above,sandwich_below"


@dataclass(frozen=True)
class BoundReport:
    """Exact tails and the four bounds at one (k, d, eps).

    Bound fields are ``None`` where the assumptions (including parity) fail.
    ``log_*`` fields carry the same numbers in log space; sandwich checks are
    made there, with ``SLACK`` of roundoff allowance.
    """

    k: int
    d: int
    eps: float
    exact_above: float
    exact_below: float
    lower_of_above: Optional[float]
    upper_of_above: Optional[float]
    lower_of_below: Optional[float]
    upper_of_below: Optional[float]
    sandwich_above: Optional[bool]
    sandwich_below: Optional[bool]
    assumptions: AssumptionSet
    log_exact_above: float = math.nan
    log_exact_below: float = math.nan

    @property
    def violated(self) -> bool:
        return self.sandwich_above is False or self.sandwich_below is False

    def csv_row(self) -> str:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, int):
                return str(v)
            return repr(float(v))

        return ",".join(
            fmt(v)
            for v in (
                self.k, self.d, self.eps,
                self.exact_above, self.lower_of_above, self.upper_of_above,
                self.exact_below, self.lower_of_below, self.upper_of_below,
                self.sandwich_above, self.sandwich_below,
            )
        )


def bound_report(k: int, d: int, eps: float, delta: Optional[float] = None) -> BoundReport:
    params = SplitParams(k, d)
    q = TailQuery(params, eps)
    la, lb = log_tail_above(q), log_tail_below(q)
    a = assumptions_hold(eps, delta, params)
    if not (a.size_ok and a.parity_ok):
        return BoundReport(k, d, eps, math.exp(la), math.exp(lb), None, None, None, None, None, None, a, la, lb)
    lo_a = log_upper_tail_lower_bound(params, eps)
    up_a = log_upper_tail_upper_bound(k, eps)
    lo_b = log_lower_tail_lower_bound(params, eps)
    up_b = log_lower_tail_upper_bound(k, eps)
    sw_a = lo_a <= la + SLACK and la <= up_a + SLACK
    sw_b = lo_b <= lb + SLACK and lb <= up_b + SLACK
    return BoundReport(
        k, d, eps,
        math.exp(la), math.exp(lb),
        math.exp(lo_a), math.exp(up_a), math.exp(lo_b), math.exp(up_b),
        sw_a, sw_b, a, la, lb,
    )
