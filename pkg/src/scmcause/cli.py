"""Command-line entry point: ``scmcause <subcommand> ...``.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (unreadable or
malformed datasets/reports, method/data mismatches) and failed checks.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .bench import METHODS, BenchConfig, lambda_sweep, run_benchmark
from .datagen import FAMILIES, GenConfig, balance_dataset, gen_pairs
from .gradcheck import gradient_suite
from .pairs import PairFormatError, load_pair_dir, save_pair_dir
from .report import ReportFormatError, write_report

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default; usage errors are 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _method_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--data", required=True, type=Path, help="dataset directory (meta.tsv + <pair_id>.txt)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--k", type=int, help="AEQ quantile-vector length")
    p.add_argument("--bins", type=int, help="histogram bins for the entropy baseline")
    p.add_argument("--lambda", dest="lam", type=float, help="weight of the independence loss")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="parallel pair evaluations (default: CC_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scmcause", description="Cause-effect direction inference for paired variables.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic pair dataset")
    g.add_argument("--family", required=True, choices=FAMILIES)
    g.add_argument("--n-pairs", type=int, default=None)
    g.add_argument("--dim", type=int, default=None)
    g.add_argument("--noise-dim", type=int, default=None)
    g.add_argument("--m", type=int, default=None)
    g.add_argument("--sigma2", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--balance", action="store_true", help="equalize cause/effect autoencoder errors")
    g.add_argument("--tol", type=float, default=0.1)

    _method_args(sub.add_parser("infer", help="score every pair and write per-pair decisions"))
    _method_args(sub.add_parser("benchmark", help="score a labelled dataset and report AUC/accuracy"))

    s = sub.add_parser("sweep-lambda", help="adversarial AUC over a grid of lambda values")
    s.add_argument("--data", required=True, type=Path)
    s.add_argument("--grid", required=True, type=_float_list)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)

    c = sub.add_parser("check-gradients", help="run the finite-difference gradient suite")
    c.add_argument("--n-nets", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--tol", type=float, default=1e-4)
    return parser


def _bench_config(args) -> BenchConfig:
    try:
        return _build_bench_config(args)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _build_bench_config(args) -> BenchConfig:
    cfg = BenchConfig()
    train, aeq = cfg.train, cfg.aeq
    if getattr(args, "lam", None) is not None:
        train = replace(train, lam=args.lam)
    if args.epochs is not None:
        train = replace(train, epochs=args.epochs)
        aeq = replace(aeq, train=replace(aeq.train, epochs=args.epochs))
    if args.seed is not None:
        train = replace(train, seed=args.seed)
        aeq = replace(aeq, train=replace(aeq.train, seed=args.seed))
    if getattr(args, "k", None) is not None:
        aeq = replace(aeq, k=args.k)
    bins = args.bins if getattr(args, "bins", None) is not None else cfg.bins
    return BenchConfig(train=train, aeq=aeq, bins=bins)


def _cmd_generate(args) -> int:
    kw = {k: v for k, v in (("n_pairs", args.n_pairs), ("dim", args.dim), ("noise_dim", args.noise_dim),
                            ("m", args.m), ("sigma2", args.sigma2)) if v is not None}
    try:
        if args.family == "uni_multi":
            cfg = GenConfig.univariate(seed=args.seed, **kw)
        else:
            cfg = GenConfig(family=args.family, seed=args.seed, **kw)
    except ValueError as e:
        raise UsageError(str(e)) from None
    pairs = gen_pairs(cfg)
    if args.balance:
        pairs, outcomes = balance_dataset(pairs, tol=args.tol)
        failed = [o.pair_id for o in outcomes if not o.balanced]
        if failed:
            print(f"{len(failed)} pair(s) not balanced within tol {args.tol}: {', '.join(failed)}", file=sys.stderr)
    save_pair_dir(pairs, args.out)
    print(f"wrote {len(pairs)} {cfg.family} pairs to {args.out}")
    return EXIT_OK


def _cmd_score(args, summary: bool) -> int:
    pairs = load_pair_dir(args.data)
    report = run_benchmark(pairs, args.method, _bench_config(args), dataset=str(args.data), workers=args.workers)
    write_report(report, args.out, args.format)
    if summary:
        auc = "n/a" if report.auc is None else f"{report.auc:.4f}"
        print(f"{report.method} on {report.dataset}: AUC {auc}  accuracy {report.accuracy:.4f}  "
              f"({len(report.pairs)} pairs, {report.wall_time:.1f}s)")
        if report.mean_ind_causal is not None:
            print(f"Ind C {report.mean_ind_causal:.4f}  Ind E {report.mean_ind_anticausal:.4f}")
    else:
        for r in report.pairs:
            print(f"{r.pair_id}\t{r.decision.value}\t{r.score:.6g}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    pairs = load_pair_dir(args.data)
    rows = lambda_sweep(pairs, args.grid, _bench_config(args), dataset=str(args.data), workers=args.workers)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("lambda", "auc"))
        for lam, auc in rows:
            w.writerow((format(lam, ".17g"), "" if auc is None else format(auc, ".17g")))
    for lam, auc in rows:
        print(f"lambda {lam:g}\tAUC {auc if auc is None else round(auc, 4)}")
    return EXIT_OK


def _cmd_check(args) -> int:
    ok = True
    for r in gradient_suite(args.n_nets, args.seed):
        status = "ok" if r.passed(args.tol) else "FAIL"
        ok &= r.passed(args.tol)
        print(f"{r.activation:<10} {r.loss:<4} nets={r.n_nets} max_rel_error={r.max_rel_error:.3e} {status}")
    return EXIT_OK if ok else EXIT_DATA


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command in ("infer", "benchmark"):
            return _cmd_score(args, summary=args.command == "benchmark")
        if args.command == "sweep-lambda":
            return _cmd_sweep(args)
        return _cmd_check(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PairFormatError, ReportFormatError, FileNotFoundError, NotADirectoryError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        # invalid configurations or method/data mismatches surface as ValueError
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
