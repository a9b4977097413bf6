"""``young`` command line: constants, deficits, sweeps, extremizer files, rearrangement,
linear recovery.  Exit codes: 0 success, 2 usage or parse error, 3 degenerate input."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import (DegenerateCoefficients, DegenerateSecondMoment, EmptySet,
                     InsufficientRichPoints, YoungLabError, ZeroFunction, ZeroSamples)
from .exponents import complete_triple, extremal_ratios, sharp_constant, validate_triple
from .gaussians import GaussianTriple, evaluate_extremizer
from .grid import Grid, deficit, lp_norm, read_function_csv, write_function_csv
from .homomorphism import read_corruption_config, read_samples, recover_character, recover_linear
from .rearrangement import symmetric_rearrangement
from .recovery import fmt, recovery_pipeline
from .sweep import read_config, write_sweep

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 2, 3
DEGENERATE = (ZeroFunction, ZeroSamples, DegenerateCoefficients, DegenerateSecondMoment,
              EmptySet, InsufficientRichPoints)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Usage(f"{self.prog}: error: {message}")


class _Usage(Exception):
    pass


def _triple(args):
    if args.r is None:
        return complete_triple(args.p, args.q)
    return validate_triple(args.p, args.q, args.r)


def _add_triple(p, required=True):
    p.add_argument("--p", type=float, required=required)
    p.add_argument("--q", type=float, required=required)
    p.add_argument("--r", type=float, default=None, help="completed from p, q when omitted")


def _out(key, value):
    print(f"{key} = {fmt(value)}")


# ---------------------------------------------------------------- commands

def cmd_constants(args):
    t = _triple(args)
    sc = sharp_constant(t, args.d)
    ratios = extremal_ratios(t)
    _out("p", t.p)
    _out("q", t.q)
    _out("r", t.r)
    _out("d", args.d)
    _out("C_p", sc.c_p)
    _out("C_q", sc.c_q)
    _out("C_r", sc.c_r)
    _out("A", sc.a)
    _out("A^d", sc.a_pow_d)
    _out("sigma", ratios.sigma)
    _out("tau", ratios.tau)
    return EXIT_OK


def cmd_deficit(args):
    t = _triple(args)
    f, g, h = (read_function_csv(p) for p in (args.f, args.g, args.h))
    if not (f.grid == g.grid == h.grid):
        raise _Usage("input files lie on different grids")
    dfc = deficit(f, g, h, t)
    _out("delta", dfc.delta)
    _out("value", abs(dfc.value))
    _out("bound", dfc.bound)
    _out("flags", ";".join(sorted(dfc.flags)) or "none")
    if args.recover:
        cert = recovery_pipeline(f, g, h, t, seed=args.seed)
        cert.write(args.recover)
        for k, e in zip(("eps_f", "eps_g", "eps_h"), cert.eps):
            _out(k, e)
        _out("certificate", args.recover)
    return EXIT_OK


def cmd_sweep(args):
    cfg = read_config(args.config)
    out = args.output or cfg.output
    rows, summ, text = write_sweep(cfg, out, threads=args.threads)
    if not out:
        sys.stdout.write(text)
    else:
        _out("rows", len(rows))
        _out("monotone", summ.monotone)
        _out("output", out)
    return EXIT_OK


def _vec(v, d, name):
    if v is None:
        return np.zeros(d)
    v = np.asarray(v, dtype=float)
    if v.size == 1 and d > 1:
        v = np.full(d, float(v[0]))
    if v.size != d:
        raise _Usage(f"{name} needs {d} components")
    return v


def cmd_make_extremizer(args):
    t = _triple(args)
    d = args.d
    grid = Grid.cube(args.lo, args.hi, args.n, d)
    a1, a2 = _vec(args.a1, d, "--a1"), _vec(args.a2, d, "--a2")
    M = None
    if args.matrix is not None:
        if len(args.matrix) != d * d:
            raise _Usage(f"--matrix needs {d * d} entries")
        M = np.array(args.matrix).reshape(d, d)
    freq = None if args.phase_freq is None else tuple(_vec(args.phase_freq, d, "--phase-freq"))
    base = GaussianTriple.extremal(t, d, lam=args.lam, a1=a1, a2=a2, M=M, freq=freq,
                                   phases=tuple(args.phases))
    problems = []
    a3 = a1 + a2 if args.a3 is None else _vec(args.a3, d, "--a3")
    if np.max(np.abs(a3 - (a1 + a2))) > 1e-12:
        problems.append("a3 != a1 + a2")
    if args.freq_mismatch:
        problems.append("h frequency differs from f, g")
    if problems and not args.allow_invalid:
        raise _Usage("refusing to write a non-extremizer (" + "; ".join(problems)
                     + "); pass --allow-invalid to override")
    tr = base.replace(a3=tuple(a3), validate=not args.allow_invalid)
    f, g, h = evaluate_extremizer(tr, grid)
    if args.freq_mismatch:
        dv = _vec(args.freq_mismatch, d, "--freq-mismatch")
        h = h.with_values(h.values * np.exp(-1j * sum(v * m for v, m in zip(dv, grid.mesh()))))
    paths = [f"{args.prefix}_{k}.csv" for k in "fgh"]
    for x, pth in zip((f, g, h), paths):
        write_function_csv(pth, x)
        print(pth)
    return EXIT_OK


def cmd_rearrange(args):
    f = read_function_csv(args.input)
    fs = symmetric_rearrangement(f)
    write_function_csv(args.output, fs)
    for s in args.norms:
        _out(f"norm_{fmt(s)}", lp_norm(f, s))
        _out(f"norm_{fmt(s)}_rearranged", lp_norm(fs, s))
    _out("output", args.output)
    return EXIT_OK


def cmd_recover_linear(args):
    S = read_samples(args.samples)
    gamma = args.gamma
    if args.config:
        model = read_corruption_config(args.config)
        S = model.apply(S)
        gamma = model.gamma if gamma is None else gamma
    if args.tau is not None:
        S = S.with_values(S.values, tau=args.tau)
    if S.multiplicative:
        rec = recover_character(S, gamma=gamma, seed=args.seed)
    else:
        rec = recover_linear(S, gamma=gamma, seed=args.seed)
    lin = rec.linear.real if np.all(np.imag(rec.linear) == 0) else rec.linear
    _out("linear", lin)
    _out("constant", rec.constant if np.imag(rec.constant) else np.real(rec.constant))
    _out("residual_fraction", rec.residual_fraction)
    _out("threshold", rec.threshold)
    _out("max_inlier_residual", rec.max_inlier_residual)
    _out("rich_fraction", rec.rich_fraction)
    _out("branch", rec.branch)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    p = _Parser(prog="young", description="Sharp Young inequality laboratory")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("constants", help="sharp constants and extremal ratios")
    _add_triple(c)
    c.add_argument("--d", type=int, default=1)
    c.set_defaults(func=cmd_constants)

    c = sub.add_parser("deficit", help="deficit of three function files")
    c.add_argument("f")
    c.add_argument("g")
    c.add_argument("h")
    _add_triple(c)
    c.add_argument("--recover", metavar="CERT", help="run the pipeline and write a certificate")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_deficit)

    c = sub.add_parser("sweep", help="deficit versus distance sweep")
    c.add_argument("config")
    c.add_argument("--output", default=None)
    c.add_argument("--threads", type=int, default=None)
    c.set_defaults(func=cmd_sweep)

    c = sub.add_parser("make-extremizer", help="write an extremizing triple")
    _add_triple(c)
    c.add_argument("--d", type=int, default=1)
    c.add_argument("--lo", type=float, default=-20.0)
    c.add_argument("--hi", type=float, default=20.0)
    c.add_argument("--n", type=int, default=4096)
    c.add_argument("--lam", type=float, default=1.0)
    c.add_argument("--a1", type=float, nargs="+")
    c.add_argument("--a2", type=float, nargs="+")
    c.add_argument("--a3", type=float, nargs="+")
    c.add_argument("--matrix", type=float, nargs="+", help="d*d entries, row major")
    c.add_argument("--phase-freq", type=float, nargs="+",
                   help="common frequency v: f, g carry e^{iv.x}, h carries e^{-iv.x}")
    c.add_argument("--phases", type=float, nargs=2, default=(0.0, 0.0))
    c.add_argument("--freq-mismatch", type=float, nargs="+",
                   help="extra frequency on h (breaks extremality)")
    c.add_argument("--allow-invalid", action="store_true")
    c.add_argument("--prefix", default="extremizer")
    c.set_defaults(func=cmd_make_extremizer)

    c = sub.add_parser("rearrange", help="symmetric decreasing rearrangement of a file")
    c.add_argument("input")
    c.add_argument("output")
    c.add_argument("--norms", type=float, nargs="*", default=[1.0, 2.0])
    c.set_defaults(func=cmd_rearrange)

    c = sub.add_parser("recover-linear", help="recover an affine map from a samples file")
    c.add_argument("samples")
    c.add_argument("--config", help="corruption model applied before recovery")
    c.add_argument("--gamma", type=float, default=None)
    c.add_argument("--tau", type=float, default=None)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_recover_linear)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _Usage as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:   # --help
        return int(exc.code or 0)
    except DEGENERATE as exc:
        print(f"young: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (YoungLabError, OSError, ValueError) as exc:
        print(f"young: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
