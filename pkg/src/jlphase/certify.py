"""Lower bounds on the failure probability of arbitrary k x d matrices.

For any A with singular value decomposition A = U S V^T and w uniform on the
sphere, x = V^T w is uniform too, so

    |Aw|^2 = sum_i lambda_i^2 x_i^2 = s * c(u),   c(u) = sum_i lambda_i^2 u_i^2,

with (s, u) the split of x at the rank r of A.  Since s is independent of u,
conditioning on u shows that |Aw|^2 leaves [1 - eps, 1 + eps] with
probability at least min(P[s > s0(1+eps)], P[s < s0(1-eps)]) at s0 = r/d.
No (eps, delta)-JL distribution on k x d matrices can exist once that floor
exceeds delta.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from . import rng as rngmod
from . import tails
from .bounds import (
    gamma1,
    gamma2,
    log_lower_tail_lower_bound_delta,
    log_upper_tail_lower_bound_delta,
)
from .errors import DomainError
from .sphere import SplitParams, sample_sphere_batch
from .transforms import DistortionEstimate, ProjectionMatrix, read_matrix

RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Singular values of A (nonincreasing) and the matching right singular vectors.

    ``right_vectors`` holds V^T restricted to the first k rows, so that
    ``right_vectors @ w`` are the coordinates x_i of V^T w that carry weight.
    """

    k: int
    d: int
    singular_values: np.ndarray
    right_vectors: np.ndarray = field(repr=False)

    @property
    def rank(self) -> int:
        sv = self.singular_values
        if sv.size == 0 or sv[0] == 0.0:
            return 0
        return int(np.count_nonzero(sv > RANK_RTOL * sv[0]))

    def squared_norm(self, w) -> np.ndarray:
        """|Aw|^2 through sum lambda_i^2 x_i^2; w may be a vector or an (n, d) batch."""
        x = np.asarray(w, dtype=float) @ self.right_vectors.T
        return (x * x) @ (self.singular_values ** 2)


def _as_matrix(a: Union[ProjectionMatrix, np.ndarray, str, Path]) -> np.ndarray:
    if isinstance(a, ProjectionMatrix):
        return np.asarray(a.entries)
    if isinstance(a, (str, Path)):
        return np.asarray(read_matrix(a).entries)
    return np.atleast_2d(np.asarray(a, dtype=float))


def spectral_profile(a) -> SpectralProfile:
    """SVD of a matrix, a :class:`ProjectionMatrix`, or a matrix file path."""
    m = _as_matrix(a)
    k, d = m.shape
    if k > d:
        raise DomainError(f"need k <= d, got a {k} x {d} matrix")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    _, sv, vt = np.linalg.svd(m, full_matrices=False)
    sv.setflags(write=False)
    vt.setflags(write=False)
    return SpectralProfile(k, d, sv, vt)


# -- exact floor ------------------------------------------------------------

def exact_failure_floor(k: int, d: int, eps: float) -> float:
    """min of the two exact tails; a floor on the failure probability of any rank-k matrix."""
    return tails.certified_tail_floor(tails.query(k, d, eps))


def _check_eps(eps: float):
    if not (eps > 0.0 and math.isfinite(eps)):
        raise DomainError(f"eps must be a positive finite real, got {eps!r}")


def empirical_failure_prob(
    a,
    eps: float,
    n: int,
    seed: int = rngmod.DEFAULT_SEED,
    method: str = "direct",
    key: tuple = (),
) -> DistortionEstimate:
    """Monte Carlo estimate of P[ | |Aw|^2 - 1 | > eps ] for w uniform on S^{d-1}.

    ``method="direct"`` samples w and multiplies.  ``method="decomposed"``
    samples s from its exact beta law at the rank r of A and u uniform on
    S^{r-1}, and uses |Aw|^2 = s * sum lambda_i^2 u_i^2; it has the same law
    and costs O(r) per trial instead of O(kd).  ``key`` is appended to the
    substream key so that several matrices can share one seed.
    """
    _check_eps(eps)
    prof = spectral_profile(a)
    d = prof.d
    base = (rngmod.KEY_FAILURE, *key)
    if method == "direct":
        m = _as_matrix(a)

        def run(stream, cnt):
            y = sample_sphere_batch(d, cnt, stream) @ m.T
            sq = np.einsum("ij,ij->i", y, y)
            return int(np.count_nonzero(np.abs(sq - 1.0) > eps))

        counts = rngmod.chunked(n, seed, (*base, 0), run)
    elif method == "decomposed":
        r = prof.rank
        lam2 = prof.singular_values[:r] ** 2

        def run(stream, cnt):
            if r == 0:
                sq = np.zeros(cnt)
            else:
                s = np.ones(cnt) if r == d else stream.beta(r / 2.0, (d - r) / 2.0, size=cnt)
                u = sample_sphere_batch(r, cnt, stream)
                sq = s * ((u * u) @ lam2)
            return int(np.count_nonzero(np.abs(sq - 1.0) > eps))

        counts = rngmod.chunked(n, seed, (*base, 1), run)
    else:
        raise DomainError(f"method must be 'direct' or 'decomposed', got {method!r}")
    return DistortionEstimate.from_count(sum(counts), n, eps)


# -- certificate ------------------------------------------------------------

def _check_eps_delta(eps: float, delta: float):
    if not 0.0 < eps <= 0.5:
        raise DomainError(f"eps must lie in (0, 1/2], got {eps!r}")
    if not 0.0 < delta <= 0.5:
        raise DomainError(f"delta must lie in (0, 1/2], got {delta!r}")


@dataclass(frozen=True)
class CertVerdict:
    """Outcome of the impossibility test at concrete (k, d, eps, delta).

    ``no_jld`` means the exact floor L exceeds delta, so no distribution on
    k x d matrices achieves failure probability at most delta.  A false
    verdict is inconclusive, not an existence claim.  The analytic floor is
    the smaller of the two delta-form tail lower bounds; ``floor_above_alt``
    is the upper-tail form with the e^-2/(4 sqrt pi) prefactor.  The analytic
    fields are None where s0 >= 0.4 puts them out of range.
    """

    k: int
    d: int
    eps: float
    delta: float
    L: float
    margin: float
    no_jld: bool
    eta: float
    gamma1: float | None
    gamma2: float | None
    analytic_floor: float | None
    floor_above: float | None
    floor_above_alt: float | None
    floor_below: float | None

    def to_record(self) -> str:
        """One-line JSON record."""
        return json.dumps(asdict(self), sort_keys=False, allow_nan=False)


def certify_no_jld(k: int, d: int, eps: float, delta: float) -> CertVerdict:
    _check_eps_delta(eps, delta)
    params = SplitParams(k, d)
    big_l = exact_failure_floor(k, d, eps)
    log_inv = math.log(1.0 / delta)
    eta = k * eps * eps / log_inv
    g1 = g2 = floor = fa = fa_alt = fb = None
    if params.s0 < 0.4:
        s0 = params.s0
        g1 = gamma1(eta, delta, s0)
        g2 = gamma2(eta, delta, eps, s0)
        fa = math.exp(log_upper_tail_lower_bound_delta(eta, delta, s0))
        fa_alt = math.exp(log_upper_tail_lower_bound_delta(eta, delta, s0, sqrt_pi=True))
        fb = math.exp(log_lower_tail_lower_bound_delta(eta, delta, eps, s0))
        floor = min(fa, fb)
    return CertVerdict(
        k=params.k, d=params.d, eps=float(eps), delta=float(delta),
        L=big_l, margin=big_l - delta, no_jld=big_l > delta, eta=eta,
        gamma1=g1, gamma2=g2, analytic_floor=floor,
        floor_above=fa, floor_above_alt=fa_alt, floor_below=fb,
    )


def eta_k(eta: float, eps: float, delta: float) -> int:
    """floor(eta eps^-2 log(1/delta))."""
    return math.floor(eta * math.log(1.0 / delta) / (eps * eps))


def eta_threshold_scan(eta: float, eps: float, delta: float, d: int) -> CertVerdict:
    """Certify at k = floor(eta eps^-2 log(1/delta)); the verdict's eta is the nominal one."""
    if not eta > 0.0:
        raise DomainError(f"eta must be positive, got {eta!r}")
    _check_eps_delta(eps, delta)
    k = eta_k(eta, eps, delta)
    if k < 1:
        raise DomainError(f"eta={eta} gives k={k}; increase eta")
    if k >= d:
        raise DomainError(f"k={k} is not below d={d}; increase d")
    v = certify_no_jld(k, d, eps, delta)
    if v.gamma1 is None:
        return v
    s0 = k / d
    fa = math.exp(log_upper_tail_lower_bound_delta(eta, delta, s0))
    fa_alt = math.exp(log_upper_tail_lower_bound_delta(eta, delta, s0, sqrt_pi=True))
    fb = math.exp(log_lower_tail_lower_bound_delta(eta, delta, eps, s0))
    return CertVerdict(
        k=v.k, d=v.d, eps=v.eps, delta=v.delta, L=v.L, margin=v.margin, no_jld=v.no_jld,
        eta=float(eta), gamma1=gamma1(eta, delta, s0), gamma2=gamma2(eta, delta, eps, s0),
        analytic_floor=min(fa, fb), floor_above=fa, floor_above_alt=fa_alt, floor_below=fb,
    )
