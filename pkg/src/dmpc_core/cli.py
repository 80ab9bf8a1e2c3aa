"""
Command-line entry point

    dmpc run --config PATH [--out DIR] [--seed N]
    dmpc gradcheck --env pendulum|cartpole|lqr [--eps 1e-5]
    dmpc bench [--caps 10,50,100] [--trials 10]

Exit status is 0 on success and 1 on an invalid config, an aborted
training run or a failed gradient check.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .exceptions import CoreError
from .experiments.bench import bench_backward
from .experiments.gradcheck import gradcheck
from .experiments.results import ResultsWriter, dump_json
from .experiments.runner import run_experiment
from .utils import log_level_from_env, output_dir_override

logger = logging.getLogger(__name__)


def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("expected positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dmpc", description="Differentiable MPC experiments")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
    run.add_argument("--out", type=Path, default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="seed override")

    check = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    check.add_argument("--env", choices=("pendulum", "cartpole", "lqr"), default="pendulum")
    check.add_argument("--eps", type=float, default=1e-5, help="finite-difference step")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--instances", type=int, default=1)
    check.add_argument("--tolerance", type=float, default=1e-3, help="max relative error")

    bench = sub.add_parser("bench", help="time the forward and backward passes")
    bench.add_argument("--caps", type=_int_list, default=[10, 50, 100], help="iteration caps, e.g. 10,50,100")
    bench.add_argument("--n-states", type=_int_list, default=[4, 8, 16], help="state sizes")
    bench.add_argument("--trials", type=int, default=10)
    bench.add_argument("--horizon", type=int, default=20)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", type=Path, default=None, help="write bench.csv here")
    return ap


def _configure_logging(verbose: int) -> None:
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = log_level_from_env()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _run(args: argparse.Namespace) -> int:
    summary = run_experiment(args.config, args.out, args.seed)
    if summary.get("passed") is False:
        logger.error("gradient check failed")
        return 1
    print(f"{summary['experiment']}: {summary['status']}")
    return 0


def _gradcheck(args: argparse.Namespace) -> int:
    report = gradcheck(args.env, args.eps, args.seed, args.instances, args.tolerance)
    print(dump_json({k: report[k] for k in ("env", "eps", "max_rel_error", "passed", "tolerance")}), end="")
    return 0 if report["passed"] else 1


def _bench(args: argparse.Namespace) -> int:
    table = bench_backward(args.n_states, args.caps, args.trials, args.horizon, args.seed)
    out = args.out or output_dir_override()
    if out is not None:
        with ResultsWriter(out) as writer:
            path = writer.write_table("bench.csv", table)
        logger.info("wrote %s", path)
    print(table.to_string(index=False))
    return 0


COMMANDS = {"run": _run, "gradcheck": _gradcheck, "bench": _bench}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except CoreError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
