"""Command-line entry point ``tensor-gue``.

Exit codes: 0 success (for ``selftest``: every suite passed), 1 selftest
failure, 2 configuration error, 3 size cap exceeded, 4 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ConvergenceError, InvalidArgumentError, SizeLimitError
from .experiments import config as config_mod
from .experiments import runner, selftest

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_SIZE, EXIT_SOLVER = 0, 1, 2, 3, 4

RUNNERS = {
    "thm1": runner.run_thm1,
    "thm2": runner.run_thm2,
    "weak": runner.run_weak,
    "free-spectrum": runner.run_free_spectrum,
}

log = logging.getLogger("tensor_gue")


def resolve_workers(threads):
    """``--threads`` if given, else ``TENSOR_GUE_THREADS``, else 1; 0 means one per CPU."""
    if threads is None:
        env = os.environ.get("TENSOR_GUE_THREADS")
        if env is None or env.strip() == "":
            return 1
        try:
            threads = int(env)
        except ValueError:
            raise config_mod.ConfigError(f"TENSOR_GUE_THREADS must be an integer, got {env!r}") from None
    if threads < 0:
        raise config_mod.ConfigError(f"thread count must be nonnegative, got {threads}")
    return threads or (os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensor-gue", description="Tensor-GUE strong convergence experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, help="override master_seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--format", choices=["json", "csv", "both"], help="overrides output.format")
        p.add_argument("--threads", type=int, help="worker processes; 0 = one per CPU")
    st = sub.add_parser("selftest")
    st.add_argument("--corrupt", action="append", default=[], choices=list(selftest.CORRUPTIBLE), help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "selftest":
        results = selftest.run_selftest(args.corrupt)
        print(selftest.format_report(results))
        return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST

    try:
        cfg = config_mod.load_config(args.config, seed=args.seed)
        workers = resolve_workers(args.threads)
        log.info("running %s with %d worker(s)", args.command, workers)
        output = RUNNERS[args.command](cfg, workers=workers)
        out_dir = args.out or cfg["output"]["dir"]
        fmt = args.format or cfg["output"]["format"]
        for path in runner.write_outputs(output, out_dir, fmt):
            print(path)
    except SizeLimitError as exc:
        print(f"size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except ConvergenceError as exc:
        print(f"solver failure: {exc} (residual {exc.residual:.3e} after {exc.iterations} iterations)", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidArgumentError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
