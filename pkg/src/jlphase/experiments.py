"""Seeded end-to-end checks that write their results to a directory.

Each ``run_*`` function returns a small result object and writes one or more
UTF-8 text files whose bytes depend only on the seed, so two runs with the
same seed can be compared file by file.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import rng as rngmod
from . import tails
from .bounds import C_EXISTENCE
from .certify import empirical_failure_prob, exact_failure_floor
from .phase import SweepConfig, SweepResult, run_sweep
from .sphere import SplitParams, sample_sphere_batch, split_batch
from .transforms import (
    DistortionEstimate,
    Kind,
    achlioptas_matrix,
    estimate_distortion_prob,
    gaussian_matrix,
    haar_rows,
    kmn_upper_k,
    orthogonal_projection_matrix,
)

KS_ALPHA = 0.01
SIGMAS = 4.0


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_kv(path: Path, rows: list[tuple[str, object]]):
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "\n".join(f"{k}={_fmt(v)}" for k, v in rows) + "\n"
    path.write_text(text, encoding="utf-8", newline="\n")


# -- decomposition ------------------------------------------------------------

@dataclass(frozen=True)
class DecompositionResult:
    n: int
    ks_statistic: float
    ks_pvalue: float
    correlations: dict
    threshold: float

    @property
    def ks_ok(self) -> bool:
        return self.ks_pvalue > KS_ALPHA

    @property
    def corr_ok(self) -> bool:
        return all(abs(c) <= self.threshold for c in self.correlations.values())


def _features(s, u, v) -> tuple[dict, dict, dict]:
    fs = {"s": s}
    fu = {"u1": u[:, 0], "u1^2": u[:, 0] ** 2, "u1*u2": u[:, 0] * u[:, 1]}
    fv = {"v1": v[:, 0], "v1^2": v[:, 0] ** 2, "v1*v2": v[:, 0] * v[:, 1]}
    return fs, fu, fv


def _corr(x, y) -> float:
    x = x - x.mean()
    y = y - y.mean()
    return float(np.dot(x, y) / math.sqrt(np.dot(x, x) * np.dot(y, y)))


def run_decomposition(out_dir, seed: int, k: int = 5, d: int = 50, n: int = 1_000_000) -> DecompositionResult:
    """KS test of s against its exact CDF plus 15 cross-group correlations.

    Features: s; u1, u1^2, u1*u2; v1, v1^2, v1*v2.  Every pair drawn from
    different groups is checked (3 + 3 + 9 = 15); under independence each
    sample correlation has standard deviation about 1/sqrt(n).
    """
    params = SplitParams(k, d)
    parts = rngmod.chunked(n, seed, (rngmod.KEY_EXPERIMENT, 5), lambda r, m: split_batch(sample_sphere_batch(d, m, r), k))
    s = np.concatenate([p[0] for p in parts])
    u = np.concatenate([p[1] for p in parts])
    v = np.concatenate([p[2] for p in parts])
    ks = stats.kstest(s, lambda t: tails.cdf(params, np.clip(t, 0.0, 1.0)))
    fs, fu, fv = _features(s, u, v)
    corr = {}
    for ga, gb in ((fs, fu), (fs, fv), (fu, fv)):
        for na, xa in ga.items():
            for nb, xb in gb.items():
                corr[f"{na}|{nb}"] = _corr(xa, xb)
    res = DecompositionResult(n, float(ks.statistic), float(ks.pvalue), corr, SIGMAS / math.sqrt(n))
    rows = [("k", k), ("d", d), ("n", n), ("seed", seed),
            ("ks_statistic", res.ks_statistic), ("ks_pvalue", res.ks_pvalue), ("ks_pass", res.ks_ok),
            ("corr_threshold", res.threshold)]
    rows += [(f"corr[{name}]", c) for name, c in corr.items()]
    rows.append(("corr_pass", res.corr_ok))
    _write_kv(Path(out_dir) / "decomposition.txt", rows)
    return res


# -- existence side -----------------------------------------------------------

@dataclass(frozen=True)
class ExistenceResult:
    eps: float
    delta: float
    c: float
    k: int
    d: int
    exact: float
    p_hat: float
    std_error: float
    n: int

    @property
    def exact_ok(self) -> bool:
        return self.exact <= self.delta

    @property
    def mc_ok(self) -> bool:
        return DistortionEstimate(self.p_hat, self.n, self.std_error, self.eps).within(self.exact, SIGMAS)


def run_existence(out_dir, seed: int, eps: float = 0.25, delta: float = 0.05, n: int = 100_000) -> ExistenceResult:
    """Orthogonal construction at k = kmn_upper_k(eps, delta, C), d = 4k."""
    k = kmn_upper_k(eps, delta, C_EXISTENCE)
    d = 4 * k
    exact = tails.failure_probability(tails.query(k, d, eps))
    est = estimate_distortion_prob(Kind.ORTHOGONAL, eps, n, seed=seed, k=k, d=d)
    res = ExistenceResult(eps, delta, C_EXISTENCE, k, d, exact, est.p_hat, est.std_error, n)
    _write_kv(Path(out_dir) / "existence.txt", [
        ("eps", eps), ("delta", delta), ("C", C_EXISTENCE), ("k", k), ("d", d), ("n", n), ("seed", seed),
        ("exact_failure", exact), ("exact_pass", res.exact_ok),
        ("p_hat", est.p_hat), ("std_error", est.std_error), ("mc_pass", res.mc_ok),
    ])
    return res


# -- universal floor ----------------------------------------------------------

def floor_test_matrices(k: int, d: int, seed: int) -> list[tuple[str, np.ndarray]]:
    """Twenty matrices of varied structure: dense, orthogonal, sparse sign,
    rank deficient, badly conditioned, and rescaled."""
    r = lambda j: rngmod.substream(seed, rngmod.KEY_MATRIX, j)  # noqa: E731
    mats = []
    for j in range(4):
        mats.append((f"gaussian_{j}", gaussian_matrix(k, d, r(j)).entries))
    for j in range(4):
        mats.append((f"orthogonal_{j}", orthogonal_projection_matrix(k, d, r(10 + j)).entries))
    for j in range(4):
        mats.append((f"achlioptas_{j}", achlioptas_matrix(k, d, r(20 + j)).entries))
    for j, rank in enumerate((1, 5, 10, 19)):
        g = r(30 + j)
        low = g.standard_normal((k, rank)) @ g.standard_normal((rank, d))
        mats.append((f"rank{rank}", low / math.sqrt(rank * k)))
    cond = np.full(k, 1e-3)
    cond[0] = 1.0
    diag = np.zeros((k, d))
    diag[np.arange(k), np.arange(k)] = cond * math.sqrt(d)
    mats.append(("diag_1e-3", diag))
    geo = np.zeros((k, d))
    geo[np.arange(k), np.arange(k)] = np.logspace(0, -6, k) * math.sqrt(d / k)
    mats.append(("diag_geometric", geo))
    mats.append(("diag_1e-3_rotated", diag @ haar_rows(d, d, r(40))))
    mats.append(("orthogonal_x3", 3.0 * orthogonal_projection_matrix(k, d, r(41)).entries))
    return mats


@dataclass(frozen=True)
class FloorResult:
    floor: float
    rows: list  # (name, p_hat, std_error, ok)

    @property
    def ok(self) -> bool:
        return all(row[3] for row in self.rows)


def run_floor(out_dir, seed: int, k: int = 20, d: int = 400, eps: float = 0.2, n: int = 100_000) -> FloorResult:
    floor = exact_failure_floor(k, d, eps)
    rows = []
    for j, (name, a) in enumerate(floor_test_matrices(k, d, seed)):
        est = empirical_failure_prob(a, eps, n, seed=seed, method="direct", key=(j,))
        rows.append((name, est.p_hat, est.std_error, est.p_hat >= floor - SIGMAS * est.std_error))
    res = FloorResult(floor, rows)
    lines = ["name,p_hat,std_error,pass"]
    lines += [f"{nm},{p!r},{se!r},{_fmt(ok)}" for nm, p, se, ok in rows]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_kv(out / "floor.txt", [("k", k), ("d", d), ("eps", eps), ("n", n), ("seed", seed),
                                  ("exact_floor", floor), ("all_pass", res.ok)])
    (out / "floor_matrices.csv").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return res


# -- phase sweep --------------------------------------------------------------

DEFAULT_EPS_GRID = (0.2, 0.1, 0.05)
DEFAULT_DELTA_GRID = (1e-2, 1e-3, 1e-4)


def run_phase(out_dir, seed: int, mc_samples: int = 10_000) -> SweepResult:
    cfg = SweepConfig(DEFAULT_EPS_GRID, DEFAULT_DELTA_GRID, Path(out_dir), seed=seed, mc_samples=mc_samples)
    return run_sweep(cfg)


def diagonal(points) -> list:
    """Cells (0.2, 1e-2), (0.1, 1e-3), (0.05, 1e-4) in that order."""
    by = {(p.eps, p.delta): p for p in points}
    return [by[(e, x)] for e, x in zip(DEFAULT_EPS_GRID, DEFAULT_DELTA_GRID)]
