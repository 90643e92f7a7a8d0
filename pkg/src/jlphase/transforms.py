"""Random k x d projection matrices and their distortion statistics."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from . import rng as rngmod
from .bounds import C_EXISTENCE
from .errors import DomainError
from .sphere import sample_sphere_batch

ORTHO_TOL = 1e-10


class Kind(str, enum.Enum):
    ACHLIOPTAS = "achlioptas"
    GAUSSIAN = "gaussian"
    ORTHOGONAL = "orthogonal"
    # anything read from a file or built by hand
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    kind: Kind
    k: int
    d: int
    entries: np.ndarray = field(repr=False)
    scale: float

    def __post_init__(self):
        e = np.array(self.entries, dtype=float, copy=True)
        if e.shape != (self.k, self.d):
            raise DomainError(f"entries have shape {e.shape}, expected ({self.k}, {self.d})")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "kind", Kind(self.kind))

    @classmethod
    def from_array(cls, a, kind: Kind | str = Kind.CUSTOM, scale: float = 1.0) -> "ProjectionMatrix":
        a = np.atleast_2d(np.asarray(a, dtype=float))
        return cls(Kind(kind), a.shape[0], a.shape[1], a, scale)


@dataclass(frozen=True)
class DistortionEstimate:
    """Monte Carlo estimate of P[ | |Aw|^2 - 1 | > eps ]."""

    p_hat: float
    n_samples: int
    std_error: float
    eps: float

    @classmethod
    def from_count(cls, failures: int, n: int, eps: float) -> "DistortionEstimate":
        p = failures / n
        return cls(p, n, math.sqrt(p * (1.0 - p) / n), eps)

    def within(self, p: float, sigmas: float = 4.0) -> bool:
        """True if ``p`` is within ``sigmas`` standard errors of the estimate.

        With p_hat at 0 or 1 the plug-in error vanishes, so the binomial error
        at ``p`` itself is used as a floor.
        """
        se = max(self.std_error, math.sqrt(max(p * (1.0 - p), 0.0) / self.n_samples))
        return abs(self.p_hat - p) <= sigmas * se


def _check_kd(k: int, d: int):
    if k < 1 or d < 1:
        raise DomainError(f"need k >= 1 and d >= 1, got k={k}, d={d}")


# -- constructions ----------------------------------------------------------

def _achlioptas_signs(shape, stream: np.random.Generator) -> np.ndarray:
    # +1 w.p. 1/6, -1 w.p. 1/6, 0 w.p. 2/3
    u = stream.random(shape)
    return np.where(u < 1.0 / 6.0, 1.0, np.where(u < 1.0 / 3.0, -1.0, 0.0))


def achlioptas_matrix(k: int, d: int, stream: np.random.Generator) -> ProjectionMatrix:
    _check_kd(k, d)
    scale = math.sqrt(3.0 / k)
    return ProjectionMatrix(Kind.ACHLIOPTAS, k, d, scale * _achlioptas_signs((k, d), stream), scale)


def gaussian_matrix(k: int, d: int, stream: np.random.Generator) -> ProjectionMatrix:
    _check_kd(k, d)
    scale = 1.0 / math.sqrt(k)
    return ProjectionMatrix(Kind.GAUSSIAN, k, d, scale * stream.standard_normal((k, d)), scale)


def haar_rows(k: int, d: int, stream: np.random.Generator) -> np.ndarray:
    """First k rows of a Haar-distributed d x d orthogonal matrix.

    QR of a d x k Gaussian block with the signs of R's diagonal forced
    positive gives the first k columns of a Haar matrix Q; Q^T is Haar as
    well, so its first k rows are those columns transposed.
    """
    g = stream.standard_normal((d, k))
    q, r = np.linalg.qr(g, mode="reduced")
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return (q * signs).T


def orthogonal_projection_matrix(k: int, d: int, stream: np.random.Generator) -> ProjectionMatrix:
    """sqrt(d/k) times the first k rows of a Haar orthogonal matrix."""
    if not 1 <= k < d:
        raise DomainError(f"orthogonal projection needs 1 <= k < d, got k={k}, d={d}")
    scale = math.sqrt(d / k)
    return ProjectionMatrix(Kind.ORTHOGONAL, k, d, scale * haar_rows(k, d, stream), scale)


CONSTRUCTIONS = {
    Kind.ACHLIOPTAS: achlioptas_matrix,
    Kind.GAUSSIAN: gaussian_matrix,
    Kind.ORTHOGONAL: orthogonal_projection_matrix,
}


def make_matrix(kind: Kind | str, k: int, d: int, stream: np.random.Generator) -> ProjectionMatrix:
    kind = Kind(kind)
    if kind not in CONSTRUCTIONS:
        raise DomainError(f"no random construction named {kind.value!r}")
    return CONSTRUCTIONS[kind](k, d, stream)


def apply(a: ProjectionMatrix, x) -> np.ndarray:
    """A x for a vector x, or row-wise for an (n, d) batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != a.d or x.ndim not in (1, 2):
        raise DomainError(f"input has shape {x.shape}, matrix expects trailing dimension {a.d}")
    return x @ a.entries.T


# -- dimension formulas -----------------------------------------------------

def _check_eps_delta(eps: float, delta: float):
    if not 0.0 < eps <= 0.5:
        raise DomainError(f"eps must lie in (0, 1/2], got {eps!r}")
    if not 0.0 < delta <= 0.5:
        raise DomainError(f"delta must lie in (0, 1/2], got {delta!r}")


def _smallest_int_above(x: float) -> int:
    return math.floor(x) + 1


def achlioptas_k(eps: float, delta: float) -> int:
    """Smallest k > 2 log(2/delta) / (eps^2/2 - eps^3/3)."""
    _check_eps_delta(eps, delta)
    return _smallest_int_above(2.0 * math.log(2.0 / delta) / (eps * eps / 2.0 - eps ** 3 / 3.0))


def kmn_bracket(eps: float, delta: float, c: float = C_EXISTENCE) -> float:
    """The factor multiplying 4 eps^-2 log(1/delta) in the explicit existence bound."""
    _check_eps_delta(eps, delta)
    if not c >= 1.0:
        raise DomainError(f"constant C must be >= 1, got {c!r}")
    el = math.log(1.0 / delta)
    return (
        1.0
        + 2.0 * eps / (3.0 - 2.0 * eps)
        + math.log(2.0 * c) / el / (1.0 - 2.0 * eps / 3.0)
        + 2.0 * eps * eps / (4.0 * el)
    )


def baseline_k(eps: float, delta: float) -> float:
    """4 eps^-2 log(1/delta)."""
    return 4.0 * math.log(1.0 / delta) / (eps * eps)


def kmn_upper_k(eps: float, delta: float, c: float = C_EXISTENCE) -> int:
    bracket = kmn_bracket(eps, delta, c)
    return _smallest_int_above(baseline_k(eps, delta) * bracket)


# -- Monte Carlo ------------------------------------------------------------

def _image_of_e1(kind: Kind, k: int, d: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` independent draws of A e_1 for a fresh matrix A of the given kind.

    A e_1 is the first column of A, so only that column is generated: i.i.d.
    entries for the Gaussian and sign constructions, and for the orthogonal
    one the first k coordinates of a uniform point of S^{d-1} (the first
    column of a Haar matrix is uniform on the sphere), scaled by sqrt(d/k).
    Those coordinates are g / sqrt(|g|^2 + chi2_{d-k}) for a standard normal
    k-vector g, so the other d - k normals are never materialized.
    """
    if kind is Kind.GAUSSIAN:
        return rng.standard_normal((m, k)) / math.sqrt(k)
    if kind is Kind.ACHLIOPTAS:
        return math.sqrt(3.0 / k) * _achlioptas_signs((m, k), rng)
    if kind is Kind.ORTHOGONAL:
        if not 1 <= k < d:
            raise DomainError(f"orthogonal projection needs 1 <= k < d, got k={k}, d={d}")
        g = rng.standard_normal((m, k))
        rest = rng.chisquare(d - k, size=m)
        norm = np.sqrt(np.einsum("ij,ij->i", g, g) + rest)
        return g * (math.sqrt(d / k) / norm)[:, None]
    raise DomainError(f"no random construction named {kind.value!r}")


def _fails(sq_norms: np.ndarray, eps: float) -> int:
    return int(np.count_nonzero(np.abs(sq_norms - 1.0) > eps))


Source = Union[ProjectionMatrix, Kind, str]


def estimate_distortion_prob(
    source: Source,
    eps: float,
    n: int,
    seed: int = rngmod.DEFAULT_SEED,
    k: int | None = None,
    d: int | None = None,
    method: str = "column",
) -> DistortionEstimate:
    """Fraction of trials with | |Aw|^2 - 1 | > eps.

    ``source`` is either a fixed matrix, in which case w is drawn uniformly
    from S^{d-1} on every trial, or a construction name with ``k`` and ``d``,
    in which case every trial draws a fresh A and uses w = e_1.  For
    constructions, ``method="matrix"`` builds each full matrix and
    ``method="column"`` draws only A e_1 from the same law.
    """
    if not eps > 0.0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    if isinstance(source, ProjectionMatrix):
        a = source

        def run(rng, m):
            w = sample_sphere_batch(a.d, m, rng)
            y = apply(a, w)
            return _fails(np.einsum("ij,ij->i", y, y), eps)

        counts = rngmod.chunked(n, seed, (rngmod.KEY_DISTORTION, a.k, a.d), run)
        return DistortionEstimate.from_count(sum(counts), n, eps)

    kind = Kind(source)
    if k is None or d is None:
        raise DomainError("k and d are required when sampling a construction")
    _check_kd(k, d)
    if method == "column":
        def run(rng, m):
            y = _image_of_e1(kind, k, d, m, rng)
            return _fails(np.einsum("ij,ij->i", y, y), eps)
    elif method == "matrix":
        def run(rng, m):
            sq = np.empty(m)
            for i in range(m):
                col = make_matrix(kind, k, d, rng).entries[:, 0]
                sq[i] = col @ col
            return _fails(sq, eps)
    else:
        raise DomainError(f"method must be 'column' or 'matrix', got {method!r}")
    key = (rngmod.KEY_DISTORTION, k, d, list(Kind).index(kind), 0 if method == "column" else 1)
    counts = rngmod.chunked(n, seed, key, run)
    return DistortionEstimate.from_count(sum(counts), n, eps)


def squared_norm_samples(source: Source, n: int, seed: int, k=None, d=None, method="column") -> np.ndarray:
    """The raw |Aw|^2 values behind :func:`estimate_distortion_prob`, in trial order."""
    if isinstance(source, ProjectionMatrix):
        a = source

        def run(rng, m):
            y = apply(a, sample_sphere_batch(a.d, m, rng))
            return np.einsum("ij,ij->i", y, y)

        return np.concatenate(rngmod.chunked(n, seed, (rngmod.KEY_DISTORTION, a.k, a.d), run))
    kind = Kind(source)
    if method == "column":
        def run(rng, m):
            y = _image_of_e1(kind, k, d, m, rng)
            return np.einsum("ij,ij->i", y, y)
    else:
        def run(rng, m):
            out = np.empty(m)
            for i in range(m):
                col = make_matrix(kind, k, d, rng).entries[:, 0]
                out[i] = col @ col
            return out
    key = (rngmod.KEY_DISTORTION, k, d, list(Kind).index(kind), 0 if method == "column" else 1)
    return np.concatenate(rngmod.chunked(n, seed, key, run))


# -- matrix files -----------------------------------------------------------

def format_matrix(a: ProjectionMatrix) -> str:
    lines = [f"{a.k} {a.d} {a.kind.value} {a.scale:.17g}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in a.entries]
    return "\n".join(lines) + "\n"


def write_matrix(path, a: ProjectionMatrix) -> None:
    Path(path).write_text(format_matrix(a), encoding="utf-8", newline="\n")


def read_matrix(path) -> ProjectionMatrix:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise DomainError(f"{path}: empty matrix file")
    head = text[0].split()
    if len(head) != 4:
        raise DomainError(f"{path}: header must be 'k d kind scale', got {text[0]!r}")
    k, d, kind, scale = int(head[0]), int(head[1]), head[2], float(head[3])
    rows = [ln.split() for ln in text[1:] if ln.strip()]
    if len(rows) != k or any(len(r) != d for r in rows):
        raise DomainError(f"{path}: expected {k} rows of {d} values")
    return ProjectionMatrix(Kind(kind), k, d, np.array(rows, dtype=float), scale)
