"""Bracketing the JL threshold k0(eps, delta) with exact tails, and the sweep driver."""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from . import __version__
from . import rng as rngmod
from . import tails
from .errors import DomainError
from .transforms import Kind, baseline_k, estimate_distortion_prob

S0_MAX = 0.4
SCAN_LIMIT = 64
D_RULE_RATIO = 0.1
D_RULE_MAX_EXP = 9

PHASE_HEADER = "eps,delta,d,baseline,k_lo,k_hi,ratio_lo,ratio_hi"
MC_HEADER = "eps,delta,d,k_hi,n,p_hat,std_error,exact"


@dataclass(frozen=True)
class PhasePoint:
    """k_lo: largest k certified impossible.  k_hi: smallest k where the orthogonal
    construction fails with probability at most delta.  k_lo = 0 means no k fired."""

    eps: float
    delta: float
    d: int
    k_lo: int
    k_hi: int
    baseline: float
    ratio_lo: float = field(init=False)
    ratio_hi: float = field(init=False)

    def __post_init__(self):
        if not self.k_lo < self.k_hi:
            raise DomainError(f"empty bracket: k_lo={self.k_lo}, k_hi={self.k_hi}")
        object.__setattr__(self, "ratio_lo", self.k_lo / self.baseline)
        object.__setattr__(self, "ratio_hi", self.k_hi / self.baseline)

    @property
    def gap(self) -> float:
        return self.ratio_hi - self.ratio_lo

    def csv_row(self) -> str:
        return ",".join([
            repr(self.eps), repr(self.delta), str(self.d), repr(self.baseline),
            str(self.k_lo), str(self.k_hi), repr(self.ratio_lo), repr(self.ratio_hi),
        ])


def _check_grid_value(name, v):
    if not (isinstance(v, (int, float)) and 0.0 < v < 0.5):
        raise DomainError(f"{name} grid entries must lie in (0, 1/2), got {v!r}")


# -- searches ---------------------------------------------------------------

def _k_max(d: int, s0_max: float = S0_MAX) -> int:
    # largest k with k/d < s0_max, and never k = d
    return min(math.ceil(s0_max * d) - 1, d - 1)


def floor_fires(k: int, d: int, eps: float, delta: float) -> bool:
    return tails.log_certified_tail_floor(tails.query(k, d, eps)) > math.log(delta)


def orthogonal_succeeds(k: int, d: int, eps: float, delta: float) -> bool:
    return tails.failure_probability(tails.query(k, d, eps)) <= delta


def _last_true(pred, lo: int, hi: int) -> int:
    """Largest k in [lo, hi] with pred(k), given pred(lo) and monotone decreasing truth."""
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if pred(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def _first_true(pred, lo: int, hi: int) -> int:
    """Smallest k in [lo, hi] with pred(k), given pred(hi) and monotone increasing truth."""
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def search_k_lo(eps: float, delta: float, d: int, s0_max: float = S0_MAX) -> int:
    """Largest k < s0_max * d at which the exact floor exceeds delta (0 if none).

    The floor is not monotone in k for very small k, so k up to SCAN_LIMIT is
    scanned exhaustively and only the range above it is bisected.
    """
    kmax = _k_max(d, s0_max)
    fires = lambda k: floor_fires(k, d, eps, delta)  # noqa: E731
    top = min(kmax, SCAN_LIMIT)
    k_lo = 0
    for k in range(1, top + 1):
        if fires(k):
            k_lo = k
    if k_lo == top and top < kmax:
        if fires(kmax):
            raise DomainError(f"certificate still fires at k={kmax}, the largest k with s0 < {s0_max}; increase d")
        k_lo = _last_true(fires, top, kmax)
    return k_lo


def search_k_hi(eps: float, delta: float, d: int, s0_max: float = S0_MAX) -> int:
    """Smallest k < s0_max * d at which the orthogonal construction fails w.p. <= delta."""
    kmax = _k_max(d, s0_max)
    if kmax < 1:
        raise DomainError(f"d={d} leaves no k with s0 < {s0_max}; increase d")
    ok = lambda k: orthogonal_succeeds(k, d, eps, delta)  # noqa: E731
    top = min(kmax, SCAN_LIMIT)
    for k in range(1, top + 1):
        if ok(k):
            return k
    if top == kmax or not ok(kmax):
        raise DomainError(
            f"no k with s0 = k/d < {s0_max} brings the failure probability under delta={delta} at d={d}; increase d"
        )
    return _first_true(ok, top + 1, kmax)


def bracket_k0(eps: float, delta: float, d: int, s0_max: float = S0_MAX) -> PhasePoint:
    """Exact-tail bracket k_lo < k0 <= k_hi at ambient dimension d.

    The search is confined to s0 = k/d < s0_max.  The default 0.4 is where
    the analytic bounds apply; the exact tails themselves are valid for any
    k < d, so s0_max up to 1 is accepted for small illustrative cases.
    """
    if not 0.0 < s0_max <= 1.0:
        raise DomainError(f"s0_max must lie in (0, 1], got {s0_max!r}")
    _check_grid_value("eps", eps)
    _check_grid_value("delta", delta)
    if not isinstance(d, int) or d < 2:
        raise DomainError(f"d must be an integer >= 2, got {d!r}")
    k_hi = search_k_hi(eps, delta, d, s0_max)
    k_lo = search_k_lo(eps, delta, d, s0_max)
    return PhasePoint(eps, delta, d, k_lo, k_hi, baseline_k(eps, delta))


def default_d(eps: float, delta: float) -> int:
    """Smallest power of ten d with k_hi(d) / d < 0.1."""
    for e in range(1, D_RULE_MAX_EXP + 1):
        d = 10 ** e
        try:
            k_hi = search_k_hi(eps, delta, d)
        except DomainError:
            continue
        if k_hi / d < D_RULE_RATIO:
            return d
    raise DomainError(f"no d up to 1e{D_RULE_MAX_EXP} satisfies k_hi/d < {D_RULE_RATIO}")


# -- sweep ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    """``d`` is either a fixed integer or None for the power-of-ten rule.
    ``mc_samples`` > 0 adds a Monte Carlo check of each cell's k_hi."""

    eps_grid: Sequence[float]
    delta_grid: Sequence[float]
    output_dir: Union[str, Path]
    d: Optional[int] = None
    seed: int = rngmod.DEFAULT_SEED
    mc_samples: int = 0

    def __post_init__(self):
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        object.__setattr__(self, "delta_grid", tuple(float(x) for x in self.delta_grid))
        if not self.eps_grid or not self.delta_grid:
            raise DomainError("eps and delta grids must be nonempty")
        for e in self.eps_grid:
            _check_grid_value("eps", e)
        for x in self.delta_grid:
            _check_grid_value("delta", x)
        rngmod.check_seed(self.seed)
        if self.d is not None and (not isinstance(self.d, int) or self.d < 2):
            raise DomainError(f"d must be an integer >= 2 or None, got {self.d!r}")
        if self.mc_samples < 0:
            raise DomainError("mc_samples must be >= 0")

    def cells(self) -> list[tuple[float, float]]:
        return [(e, x) for e in self.eps_grid for x in self.delta_grid]

    def to_dict(self) -> dict:
        # the output directory is where the manifest lives, so it is left out
        # to keep reruns into different directories comparable
        out = asdict(self)
        del out["output_dir"]
        out["eps_grid"], out["delta_grid"] = list(self.eps_grid), list(self.delta_grid)
        out["d_rule"] = "fixed" if self.d is not None else f"smallest power of 10 with k_hi/d < {D_RULE_RATIO}"
        return out


@dataclass(frozen=True)
class SweepResult:
    points: list
    mc_rows: list
    manifest: dict


def _run_cell(cfg: SweepConfig, index: int, eps: float, delta: float):
    d = cfg.d if cfg.d is not None else default_d(eps, delta)
    pt = bracket_k0(eps, delta, d)
    mc = None
    if cfg.mc_samples:
        est = estimate_distortion_prob(
            Kind.ORTHOGONAL, eps, cfg.mc_samples,
            seed=_cell_seed(cfg.seed, index), k=pt.k_hi, d=d,
        )
        exact = tails.failure_probability(tails.query(pt.k_hi, d, eps))
        mc = (pt, est, exact)
    return pt, mc


def _cell_seed(seed: int, index: int) -> int:
    # per-cell master seed: first 64 bits of substream (KEY_SWEEP, index)
    return int(rngmod.substream(seed, rngmod.KEY_SWEEP, index).integers(0, 2 ** 63))


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def plot_files(points) -> dict[str, str]:
    """One two-column file per eps: baseline-scaled x = log(1/delta)/eps^2, y = ratio."""
    out = {}
    for eps in sorted({p.eps for p in points}, reverse=True):
        rows = sorted((p for p in points if p.eps == eps), key=lambda p: p.baseline)
        for which in ("lo", "hi"):
            lines = [f"# eps={eps!r} x=log(1/delta)/eps^2 y=ratio_{which}"]
            for p in rows:
                x = math.log(1.0 / p.delta) / (p.eps * p.eps)
                y = p.ratio_lo if which == "lo" else p.ratio_hi
                lines.append(f"{x!r} {y!r}")
            out[f"ratio_{which}_eps{eps!r}.dat"] = "\n".join(lines) + "\n"
    return out


def run_sweep(cfg: SweepConfig) -> SweepResult:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    t0 = time.perf_counter()
    cells = cfg.cells()
    results = rngmod.parallel_map(lambda job: _run_cell(cfg, job[0], *job[1]), list(enumerate(cells)))
    points = [r[0] for r in results]
    mc_rows = [r[1] for r in results if r[1] is not None]

    _write(out / "phase.csv", "\n".join([PHASE_HEADER] + [p.csv_row() for p in points]) + "\n")
    for name, text in plot_files(points).items():
        _write(out / name, text)
    if mc_rows:
        lines = [MC_HEADER]
        for pt, est, exact in mc_rows:
            lines.append(",".join([
                repr(pt.eps), repr(pt.delta), str(pt.d), str(pt.k_hi), str(est.n_samples),
                repr(est.p_hat), repr(est.std_error), repr(exact),
            ]))
        _write(out / "phase_mc.csv", "\n".join(lines) + "\n")
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "code_version": __version__,
        "cells": [{"eps": p.eps, "delta": p.delta, "d": p.d} for p in points],
        "wall_clock_seconds": time.perf_counter() - t0,
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return SweepResult(points, mc_rows, manifest)
