"""Uniform points on spheres and the split x -> (s, u, v).

For a unit vector x in R^d and 1 <= k < d the split is

    s = x_1^2 + ... + x_k^2,  u = x[:k] / sqrt(s),  v = x[k:] / sqrt(1 - s),

which decomposes the uniform law on S^{d-1} into independent factors: s with
density B f(s) on [0, 1], u uniform on S^{k-1}, v uniform on S^{d-k-1}, where

    f(s) = s^{(k-2)/2} (1-s)^{(d-k-2)/2},   B = G(d/2) / (G(k/2) G((d-k)/2)).

At the measure-zero endpoints s = 0 (resp. s = 1) the undefined factor is
fixed to e_1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DomainError
from .special import log_gamma

NORM_TOL = 1e-12


@dataclass(frozen=True)
class UnitVector:
    coords: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        c = np.array(self.coords, dtype=float, copy=True).reshape(-1)
        if c.size < 1:
            raise DomainError("a unit vector needs dim >= 1")
        if not np.all(np.isfinite(c)):
            raise DomainError("unit vector coordinates must be finite")
        err = abs(float(np.linalg.norm(c)) - 1.0)
        if err > NORM_TOL:
            raise DomainError(f"coordinates are not unit norm (| |x| - 1 | = {err:.3g})")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "dim", int(c.size))

    def __eq__(self, other):
        return isinstance(other, UnitVector) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())


@dataclass(frozen=True)
class SplitParams:
    k: int
    d: int

    def __post_init__(self):
        for name in ("k", "d"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise DomainError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not 1 <= self.k < self.d:
            raise DomainError(f"need 1 <= k < d, got k={self.k}, d={self.d}")

    @property
    def s0(self) -> float:
        return self.k / self.d

    @property
    def a(self) -> float:
        """First beta shape parameter, k/2."""
        return self.k / 2.0

    @property
    def b(self) -> float:
        """Second beta shape parameter, (d-k)/2."""
        return (self.d - self.k) / 2.0


@dataclass(frozen=True)
class SphereSplit:
    s: float
    u: UnitVector
    v: UnitVector

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise DomainError(f"split statistic must lie in [0, 1], got {self.s!r}")

    @property
    def params(self) -> SplitParams:
        return SplitParams(self.u.dim, self.u.dim + self.v.dim)


def _e1(n: int) -> np.ndarray:
    e = np.zeros(n)
    e[0] = 1.0
    return e


def sample_uniform_sphere(d: int, stream: np.random.Generator) -> UnitVector:
    """Normalize d i.i.d. standard normals."""
    return UnitVector(sample_sphere_batch(d, 1, stream)[0])


def sample_sphere_batch(d: int, n: int, stream: np.random.Generator) -> np.ndarray:
    """``n`` independent uniform points on S^{d-1}, as rows of an (n, d) array."""
    if d < 1:
        raise DomainError(f"sphere dimension d must be >= 1, got {d}")
    if n < 0:
        raise DomainError(f"sample count must be >= 0, got {n}")
    x = stream.standard_normal((n, d))
    norms = np.linalg.norm(x, axis=1)
    # a zero draw has probability 0; redraw rather than divide by it
    bad = norms == 0.0
    while bad.any():
        x[bad] = stream.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(x, axis=1)
        bad = norms == 0.0
    return x / norms[:, None]


def split(x: UnitVector, params: SplitParams) -> SphereSplit:
    if x.dim != params.d:
        raise DomainError(f"vector has dim {x.dim}, split expects d={params.d}")
    k = params.k
    head, tail = x.coords[:k], x.coords[k:]
    hn, tn = float(np.linalg.norm(head)), float(np.linalg.norm(tail))
    s = min(1.0, float(np.dot(head, head)))
    u = head / hn if hn > 0.0 else _e1(k)
    v = tail / tn if tn > 0.0 else _e1(params.d - k)
    if hn == 0.0:
        s = 0.0
    elif tn == 0.0:
        s = 1.0
    return SphereSplit(s, UnitVector(u), UnitVector(v))


def unsplit(sp: SphereSplit) -> UnitVector:
    s = sp.s
    return UnitVector(np.concatenate([math.sqrt(s) * sp.u.coords, math.sqrt(1.0 - s) * sp.v.coords]))


def split_batch(x: np.ndarray, k: int):
    """Row-wise split of an (n, d) array of unit vectors: returns (s, U, V)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or not 1 <= k < x.shape[1]:
        raise DomainError(f"split_batch needs an (n, d) array with 1 <= k < d, got shape {x.shape}, k={k}")
    head, tail = x[:, :k], x[:, k:]
    hn = np.linalg.norm(head, axis=1)
    tn = np.linalg.norm(tail, axis=1)
    s = np.minimum(1.0, np.einsum("ij,ij->i", head, head))
    with np.errstate(invalid="ignore", divide="ignore"):
        u = head / hn[:, None]
        v = tail / tn[:, None]
    u[hn == 0.0] = _e1(k)
    v[tn == 0.0] = _e1(x.shape[1] - k)
    s[hn == 0.0] = 0.0
    s[tn == 0.0] = 1.0
    return s, u, v


def log_sphere_area(d: int) -> float:
    """log of the surface area 2 pi^{d/2} / G(d/2) of S^{d-1}."""
    if d < 1:
        raise DomainError(f"sphere dimension d must be >= 1, got {d}")
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - log_gamma(0.5 * d)


def _log_power(base: float, exponent: float) -> float:
    # 0^0 = 1; 0^negative = +inf
    if exponent == 0.0:
        return 0.0
    if base == 0.0:
        return -math.inf if exponent > 0.0 else math.inf
    return exponent * math.log(base)


def log_density_f(s: float, params: SplitParams) -> float:
    """log f(s) = ((k-2)/2) log s + ((d-k-2)/2) log(1-s)."""
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"s must lie in [0, 1], got {s!r}")
    return _log_power(s, (params.k - 2) / 2.0) + _log_power(1.0 - s, (params.d - params.k - 2) / 2.0)


def log_B(params: SplitParams) -> float:
    return log_gamma(params.d / 2.0) - log_gamma(params.k / 2.0) - log_gamma((params.d - params.k) / 2.0)


def log_density(s, params: SplitParams):
    """Vectorized log of B f(s) for s strictly inside (0, 1)."""
    s = np.asarray(s, dtype=float)
    return log_B(params) + (params.k - 2) / 2.0 * np.log(s) + (params.d - params.k - 2) / 2.0 * np.log1p(-s)


# -- sample dumps ---------------------------------------------------------

def format_sample_dump(rows: Iterable[np.ndarray], d: int, seed: int) -> str:
    lines = [f"# sphere d={d} seed={seed}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_sample_dump(path, rows, d: int, seed: int) -> None:
    Path(path).write_text(format_sample_dump(rows, d, seed), encoding="utf-8", newline="\n")


def read_sample_dump(path) -> tuple[int, int, np.ndarray]:
    """Return ``(d, seed, rows)`` from a dump written by :func:`write_sample_dump`."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# sphere "):
        raise DomainError(f"{path}: missing '# sphere d=<d> seed=<seed>' header")
    fields = dict(tok.split("=", 1) for tok in lines[0][len("# sphere "):].split())
    d, seed = int(fields["d"]), int(fields["seed"])
    rows = np.array([[float(t) for t in ln.split()] for ln in lines[1:] if ln.strip()], dtype=float)
    rows = rows.reshape(-1, d)
    return d, seed, rows
