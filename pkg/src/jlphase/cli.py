"""The ``jl`` command.

Subcommands: tail, bounds, sample, project, certify, sweep.  Every option
can also come from a ``--config`` file of ``key = value`` lines, where keys
are long option names without the leading dashes (``-`` and ``_`` are
interchangeable), ``#`` starts a comment, and blank lines are ignored.
Options given on the command line win over the file.

Exit codes: 0 success, 1 a bound sandwich was violated, 2 domain or
assumption error, 3 numeric non-convergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path


from . import __version__
from . import rng as rngmod
from .bounds import CSV_HEADER, bound_report
from .certify import certify_no_jld, empirical_failure_prob, eta_threshold_scan, spectral_profile
from .errors import EXIT_DOMAIN, EXIT_IO, EXIT_NUMERIC, EXIT_OK, DomainError, NumericError
from .phase import PHASE_HEADER, SweepConfig, run_sweep
from .sphere import format_sample_dump, sample_sphere_batch
from .tails import Method, query, tail_probabilities
from .transforms import Kind, estimate_distortion_prob, format_matrix, make_matrix

EXIT_VIOLATION = 1


# -- config files -------------------------------------------------------------

def read_config(path) -> dict[str, str]:
    """Parse a ``key = value`` file into a dict with underscore keys."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise DomainError(f"{path}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


# -- subcommands ----------------------------------------------------------------

def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise DomainError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _emit(text: str, out):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
        return
    Path(out).write_text(text, encoding="utf-8", newline="\n")


def cmd_tail(args) -> int:
    _need(args, "k", "d", "eps")
    tp = tail_probabilities(query(args.k, args.d, args.eps), args.method, args.n, args.seed)
    header = "k,d,eps,method,above,below,total,abs_error_estimate"
    row = f"{args.k},{args.d},{args.eps!r},{tp.method.value},{tp.above!r},{tp.below!r},{tp.total!r},{tp.abs_error_estimate!r}"
    _emit(header + "\n" + row + "\n", args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    _need(args, "k", "d", "eps")
    rep = bound_report(args.k, args.d, args.eps, args.delta)
    a = rep.assumptions
    flags = " ".join(
        f"{name}={'true' if getattr(a, name) else 'false'}"
        for name in ("eps_ok", "delta_ok", "k_ok", "s0_ok", "parity_ok")
    )
    print(f"assumptions: {flags} assumptions_hold={'true' if a.holds else 'false'}", file=sys.stderr)
    for what in a.failures():
        print(f"assumption not met: {what}", file=sys.stderr)
    _emit(CSV_HEADER + "\n" + rep.csv_row() + "\n", args.out)
    if rep.violated:
        print("sandwich violation: an exact tail lies outside its bounds", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_sample(args) -> int:
    _need(args, "d", "n")
    stream = rngmod.substream(args.seed, rngmod.KEY_SPHERE, args.d)
    rows = sample_sphere_batch(args.d, args.n, stream)
    _emit(format_sample_dump(rows, args.d, args.seed), args.out)
    return EXIT_OK


def cmd_project(args) -> int:
    _need(args, "k", "d")
    kind = Kind(args.kind)
    a = make_matrix(kind, args.k, args.d, rngmod.substream(args.seed, rngmod.KEY_MATRIX, args.k, args.d))
    if args.out is not None:
        _emit(format_matrix(a), args.out)
    if args.eps is not None:
        est = estimate_distortion_prob(a, args.eps, args.n, seed=args.seed)
        print("kind,k,d,eps,n,p_hat,std_error")
        print(f"{kind.value},{args.k},{args.d},{args.eps!r},{est.n_samples},{est.p_hat!r},{est.std_error!r}")
    elif args.out is None:
        sys.stdout.write(format_matrix(a))
    return EXIT_OK


def cmd_certify(args) -> int:
    if args.matrix is not None:
        _need(args, "eps")
        prof = spectral_profile(args.matrix)
        est = empirical_failure_prob(args.matrix, args.eps, args.n, seed=args.seed)
        k, d = prof.k, prof.d
        print("singular_values " + " ".join(repr(float(x)) for x in prof.singular_values), file=sys.stderr)
        print(f"empirical_failure p_hat={est.p_hat!r} std_error={est.std_error!r} n={est.n_samples}", file=sys.stderr)
        if args.delta is None:
            return EXIT_OK
        verdict = certify_no_jld(k, d, args.eps, args.delta)
    elif args.eta is not None:
        _need(args, "eps", "delta", "d")
        verdict = eta_threshold_scan(args.eta, args.eps, args.delta, args.d)
    else:
        _need(args, "k", "d", "eps", "delta")
        verdict = certify_no_jld(args.k, args.d, args.eps, args.delta)
    _emit(verdict.to_record() + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    _need(args, "eps_grid", "delta_grid", "out")
    cfg = SweepConfig(args.eps_grid, args.delta_grid, args.out, d=args.d, seed=args.seed, mc_samples=args.mc_samples)
    res = run_sweep(cfg)
    print(PHASE_HEADER)
    for p in res.points:
        print(p.csv_row())
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jl", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *names):
        sp.add_argument("--config", help="key = value file supplying defaults for any option")
        sp.add_argument("--seed", type=int, default=rngmod.DEFAULT_SEED)
        sp.add_argument("--out", help="output file or directory ('-' for stdout)")
        for n in names:
            if n in ("k", "d", "n"):
                sp.add_argument(f"--{n}", type=int)
            else:
                sp.add_argument(f"--{n}", type=float)
        return sp

    sp = common(sub.add_parser("tail", help="exact or estimated tail probabilities of s"), "k", "d", "eps", "n")
    sp.add_argument("--method", choices=[m.value for m in Method], default=Method.CLOSED.value)
    sp.set_defaults(func=cmd_tail, n=100_000)

    sp = common(sub.add_parser("bounds", help="exact tails against their explicit bounds"), "k", "d", "eps", "delta")
    sp.set_defaults(func=cmd_bounds)

    sp = common(sub.add_parser("sample", help="dump uniform points on the sphere"), "d", "n")
    sp.set_defaults(func=cmd_sample)

    sp = common(sub.add_parser("project", help="draw a projection matrix"), "k", "d", "eps", "n")
    sp.add_argument("--kind", choices=[k.value for k in Kind if k is not Kind.CUSTOM], default=Kind.ORTHOGONAL.value)
    sp.set_defaults(func=cmd_project, n=100_000)

    sp = common(sub.add_parser("certify", help="impossibility certificate"), "k", "d", "eps", "delta", "eta", "n")
    sp.add_argument("--matrix", help="matrix file to profile and test")
    sp.set_defaults(func=cmd_certify, n=100_000)

    sp = common(sub.add_parser("sweep", help="bracket k0 over an (eps, delta) grid"), "d")
    sp.add_argument("--eps-grid", type=_float_list)
    sp.add_argument("--delta-grid", type=_float_list)
    sp.add_argument("--mc-samples", type=int, default=0)
    sp.set_defaults(func=cmd_sweep)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    values = read_config(known.config)
    # defaults on the chosen subparser; argparse runs string defaults through `type`
    subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    cmd = next((a for a in argv if a in subs.choices), None)
    if cmd is None:
        return
    sp = subs.choices[cmd]
    dests = {a.dest for a in sp._actions}
    unknown = sorted(set(values) - dests - {"config"})
    if unknown:
        raise DomainError(f"unknown config key(s) for '{cmd}': {', '.join(unknown)}")
    sp.set_defaults(**{k: v for k, v in values.items() if k != "config"})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except ValueError as exc:
        # DomainError, and bad enum values that came in through a config file
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
