"""Command line entry point ``rt-dlra``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import PROBLEMS, SOLVERS, parse_config
from .problem import ConfigError
from .runner import compare, run


def _snapshots(text: str):
    return tuple(sorted(float(t) for t in text.replace(",", " ").split()))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rt-dlra",
        description="Domain-decomposed low-rank radiative transfer runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configuration file")
    p_run.add_argument("config", help="key = value configuration file")
    p_run.add_argument("--problem", choices=PROBLEMS)
    p_run.add_argument("--nx", type=int)
    p_run.add_argument("--ny", type=int)
    p_run.add_argument("--n-phi", dest="n_phi", type=int)
    p_run.add_argument("--blocks-x", dest="blocks_x", type=int)
    p_run.add_argument("--blocks-y", dest="blocks_y", type=int)
    p_run.add_argument("--tol", type=float)
    p_run.add_argument("--cfl", type=float)
    p_run.add_argument("--t-end", dest="t_end", type=float)
    p_run.add_argument("--snapshots", type=_snapshots,
                       help="comma separated output times")
    p_run.add_argument("--solver", choices=SOLVERS)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--out", help="output directory (default: $RT_DLRA_OUT/...)")
    p_run.add_argument("--quiet", action="store_true")

    p_cmp = sub.add_parser("compare", help="relative L2 error of run_a against run_b")
    p_cmp.add_argument("run_a")
    p_cmp.add_argument("run_b")
    return parser


_OVERRIDES = ("problem", "nx", "ny", "n_phi", "blocks_x", "blocks_y", "tol", "cfl",
              "t_end", "snapshots", "solver", "seed", "workers", "out")


def _cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
        cfg = parse_config(text, {k: getattr(args, k) for k in _OVERRIDES})
    except (OSError, ConfigError) as exc:
        print(f"rt-dlra: {exc}", file=sys.stderr)
        return 2

    def progress(step, t, stored, inter):
        if not args.quiet and step % 10 == 0:
            print(f"step {step:6d}  t = {t:.6f}  rank {max(stored):4d}  "
                  f"intermediate {max(inter):4d}", file=sys.stderr)

    try:
        manifest = run(cfg, progress=progress)
    except Exception as exc:  # solver failure: report and exit nonzero
        print(f"rt-dlra: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"{manifest.n_steps} steps, output in {manifest.out_dir}")
    if manifest.error_vs_reference is not None:
        print(f"relative error vs full tensor: {manifest.error_vs_reference:.6e}")
    return 0


def _cmd_compare(args) -> int:
    try:
        err = compare(args.run_a, args.run_b)
    except (OSError, ValueError, KeyError) as exc:
        print(f"rt-dlra: {exc}", file=sys.stderr)
        return 2
    print(f"{err:.17g}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_compare(args)


if __name__ == "__main__":
    sys.exit(main())
