"""Command-line interface.

Exit codes: 0 success, 1 domain-negative result (no cycle, failing
criterion), 2 numeric failure, 64 usage error.  The default output
directory comes from the UNIRENORM_OUTPUT_DIR environment variable.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import NoCycleError, RenormError, SchemaError
from .records import OUTPUT_ENV, RunConfig, fmt, parse_sigma, read_record, to_csv, write_record

EXIT_OK, EXIT_NEGATIVE, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return conv


def _at_least(n):
    def conv(s):
        v = int(s)
        if v < n:
            raise argparse.ArgumentTypeError(f"must be at least {n}, got {s}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=2.0, help="critical exponent (> 1)")
    common.add_argument("--sigma", default="doubling", help="'doubling' or comma-separated images, e.g. 2,3,1")
    common.add_argument("--degree", type=_at_least(16), default=60)
    common.add_argument("--newton-tol", type=_positive(float), default=1e-10)
    common.add_argument("--cycle-tol", type=_positive(float), default=1e-12)
    common.add_argument("--fd-step", type=_positive(float), default=1e-6)
    common.add_argument("--output-dir", default=None, help=f"defaults to ${OUTPUT_ENV} or the current directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="unirenorm", description="Decomposed renormalization of unimodal pairs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("find-cycle", parents=[common], help="cycle of phi o q_t of a given period")
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--period", type=_at_least(2), default=2)
    s.add_argument("--record", help="take phi from a fixed-point document (identity otherwise)")

    s = sub.add_parser("fixed-point", parents=[common], help="Newton fixed point and its spectrum")
    s.add_argument("--period", type=_at_least(2), default=None)
    s.add_argument("--init", help="seed from a fixed-point document (continuation when alpha differs)")
    s.add_argument("--out", help="document path (default <output-dir>/fixed_point_alpha<alpha>.json)")
    s.add_argument("--no-spectrum", action="store_true")

    s = sub.add_parser("sweep-alpha", parents=[common], help="continuation table over alpha")
    s.add_argument("--alpha-min", type=float, required=True)
    s.add_argument("--alpha-max", type=float, required=True)
    s.add_argument("--step", type=_positive(float), default=0.05)
    s.add_argument("--out", help="CSV path (stdout when absent)")

    s = sub.add_parser("oracle", parents=[common], help="superstable cascade estimate of delta")
    s.add_argument("--levels", type=_at_least(6), default=9)
    s.add_argument("--out", help="CSV path (stdout when absent)")

    s = sub.add_parser("verify", parents=[common], help="run acceptance criteria")
    s.add_argument("--criteria", help="comma-separated names or numbers (all when absent)")
    s.add_argument("--out", help="also write the report to this path")
    return p


def config_from(args) -> RunConfig:
    out = args.output_dir if args.output_dir is not None else os.environ.get(OUTPUT_ENV, ".")
    period = getattr(args, "period", None)
    sigma = parse_sigma(args.sigma, period)
    return RunConfig(args.alpha, args.sigma, sigma.period, args.degree, args.newton_tol, args.cycle_tol,
                     args.fd_step, out)


def _emit(text: str, path, out_dir: str):
    if path is None:
        sys.stdout.write(text)
        return
    p = Path(path)
    if not p.is_absolute():
        p = Path(out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    print(f"wrote {p}")


# --------------------------------------------------------------------------
# commands


def cmd_find_cycle(cfg: RunConfig, t: float, record: str | None = None) -> int:
    from .funcs import PolyDiffeo
    from .unimodal import Pair, find_cycle

    phi = read_record(record).phi_star if record else PolyDiffeo.identity(cfg.degree)
    if not 0 <= t <= 1:
        raise UsageError("t must lie in [0, 1]")
    cyc = find_cycle(Pair.make(phi, t, cfg.alpha), cfg.period)
    if cyc is None:
        print(f"no cycle of period {cfg.period} at alpha={fmt(cfg.alpha)} t={fmt(t)}")
        return EXIT_NEGATIVE
    rows = [(i, I.lo, I.hi, I.orientation) for i, I in enumerate(cyc.intervals, start=1)]
    sys.stdout.write(to_csv(["i", "lo", "hi", "orientation"], rows))
    print(f"p,{fmt(cyc.p)}")
    print(f"combinatorics,{cyc.combinatorics.name}")
    return EXIT_OK


def cmd_fixed_point(cfg: RunConfig, init: str | None = None, out: str | None = None, spectrum: bool = True) -> int:
    from .solver import continue_in_alpha, fixed_point
    from .spectral import with_spectrum
    from .unimodal import Pair

    sigma = cfg.permutation
    if init:
        seed = read_record(init)
        if seed.alpha != cfg.alpha:
            rec = continue_in_alpha(seed, cfg.alpha, 0.05, cfg.newton_tol)
        else:
            rec = fixed_point(cfg.alpha, sigma, Pair.make(seed.phi_star.with_degree(cfg.degree), seed.t_star, cfg.alpha),
                              cfg.degree, cfg.newton_tol, ladder=False)
    else:
        rec = fixed_point(cfg.alpha, sigma, degree=cfg.degree, tol=cfg.newton_tol)
    if spectrum:
        rec = with_spectrum(rec, fd_step=cfg.fd_step)
    path = out or f"fixed_point_alpha{cfg.alpha:g}.json"
    p = Path(path) if Path(path).is_absolute() else Path(cfg.output_dir) / path
    write_record(p, rec, cfg, _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    print(f"residual,{fmt(rec.residual)}")
    print(f"t_star,{fmt(rec.t_star)}")
    if rec.spectral is not None:
        print(f"delta,{fmt(rec.spectral.delta)}")
        print(f"expanding_count,{rec.spectral.expanding_count}")
    print(f"document,{p}")
    return EXIT_OK


def sweep_rows(cfg: RunConfig, alpha_min: float, alpha_max: float, step: float) -> list:
    from .solver import continue_in_alpha, fixed_point
    from .spectral import spectral_report

    if alpha_min > alpha_max:
        raise UsageError("alpha-min exceeds alpha-max")
    n = int(round((alpha_max - alpha_min) / step))
    grid = sorted({round(a, 10) for a in np.linspace(alpha_min, alpha_max, max(n, 0) + 1)})
    start = min(grid, key=lambda a: (abs(a - cfg.alpha), a))
    base = fixed_point(start, cfg.permutation, degree=cfg.degree, tol=cfg.newton_tol)
    recs = {start: base}
    order = [a for a in grid if a > start] + [a for a in reversed(grid) if a < start]
    for a in order:
        near = min(recs, key=lambda b: (abs(b - a), b))
        recs[a] = continue_in_alpha(recs[near], a, step, cfg.newton_tol)
    rows = []
    for a in grid:
        rec = recs[a]
        rep = spectral_report(rec, fd_step=cfg.fd_step)
        rows.append((a, rec.t_star, rep.delta, rep.expanding_count, rec.residual))
    return rows


def cmd_sweep_alpha(cfg: RunConfig, alpha_min: float, alpha_max: float, step: float, out: str | None = None) -> int:
    rows = sweep_rows(cfg, alpha_min, alpha_max, step)
    _emit(to_csv(["alpha", "t_star", "delta", "expanding_count", "residual"], rows), out, cfg.output_dir)
    return EXIT_OK


def oracle_csv(alpha: float, levels: int) -> str:
    from .oracle import cascade_delta

    tab = cascade_delta(alpha, levels)
    rows = [(fmt(alpha), n, t, d, est) for n, t, d, est in tab.rows()]
    text = to_csv(["alpha", "n", "t_n", "d_n", "delta_hat"], rows)
    return text + f"# delta_hat,{fmt(tab.delta)}\n"


def cmd_oracle(cfg: RunConfig, levels: int, out: str | None = None) -> int:
    _emit(oracle_csv(cfg.alpha, levels), out, cfg.output_dir)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, criteria: str | None = None, out: str | None = None, stream=None) -> int:
    from .acceptance import format_report, resolve, run_suite

    stream = sys.stdout if stream is None else stream
    selection = None if not criteria else [c for c in criteria.split(",") if c.strip()]
    try:
        resolve(selection)
    except KeyError as exc:
        raise UsageError(f"unknown criterion {exc.args[0]!r}") from exc
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    stream.write(f"# generated {stamp}\n")
    results = run_suite(cfg, selection, on_result=lambda r: (stream.write(r.line() + "\n"), stream.flush()))
    report = format_report(results)
    stream.write(report.splitlines()[-1] + "\n")
    if out:
        _emit(f"# generated {stamp}\n" + report, out, cfg.output_dir)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NEGATIVE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from(args)
    except ValueError as exc:
        print(f"unirenorm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    commands = {
        "find-cycle": lambda: cmd_find_cycle(cfg, args.t, args.record),
        "fixed-point": lambda: cmd_fixed_point(cfg, args.init, args.out, not args.no_spectrum),
        "sweep-alpha": lambda: cmd_sweep_alpha(cfg, args.alpha_min, args.alpha_max, args.step, args.out),
        "oracle": lambda: cmd_oracle(cfg, args.levels, args.out),
        "verify": lambda: cmd_verify(cfg, args.criteria, args.out),
    }
    try:
        return commands[args.command]()
    except (UsageError, SchemaError) as exc:
        print(f"unirenorm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoCycleError as exc:
        print(f"unirenorm: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except (RenormError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"unirenorm: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

if __name__ == "__main__":
    sys.exit(main())
