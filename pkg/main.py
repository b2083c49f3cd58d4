#!/usr/bin/env python3
"""Main entry point for milp-inverse"""

import argparse
import asyncio
import sys

from dotenv import load_dotenv
from loguru import logger

STDERR_FORMAT = "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
JSON_SINK = "logs/milpinv_json_{time}.log"


def configure_logging(debug: bool = False):
    """Coloured stderr sink plus a serialized JSON file sink"""
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if debug else "INFO", format=STDERR_FORMAT)
    logger.add(JSON_SINK, rotation="1 day", retention="7 days", level="DEBUG", serialize=True)


# Configure logger
configure_logging()

# Load environment variables (MILPINV_CONFIG)
load_dotenv()

from src import __version__
from src.cli.commands import COMMANDS
from src.cli.context import RunContext
from src.config import load_config
from src.errors import ConfigError
from src.utils import EXIT_INPUT


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument('--time-limit', type=float, help='Branch-and-bound time limit in seconds')
    p.add_argument('--gap-tol', type=float, help='Stop once the relative optimality gap is at most this')
    p.add_argument('--seed', type=int, help='Seed recorded in the manifest (and used by randomized parts)')


def _add_bounds_flags(p: argparse.ArgumentParser):
    p.add_argument('--t-max', type=float, help='Time budget per bound-tightening subproblem (seconds)')
    p.add_argument('--jobs', type=int, help='Parallel bound-tightening workers')
    p.add_argument('--no-tighten', action='store_true', help='Use interval bounds only')
    p.add_argument('--no-cache', action='store_true', help='Neither read nor write the bounds cache')


def _add_problem_flags(p: argparse.ArgumentParser, bounds_file: bool = True):
    p.add_argument('network', help='Network file (JSON)')
    p.add_argument('problem', help='Problem file (JSON)')
    if bounds_file:
        p.add_argument('--bounds', help='Precomputed bounds file to use instead of computing bounds')
    p.add_argument('--out', help='Output file (printed to stdout when omitted)')
    _add_solver_flags(p)
    _add_bounds_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Globally optimal inverse design through ReLU network surrogates')
    parser.add_argument('--config', help='Config file (default: $MILPINV_CONFIG or config/config.yaml)')
    parser.add_argument('--debug', action='store_true', help='Enable verbose logging')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('forward', help='Evaluate the network at one design')
    p.add_argument('network', help='Network file (JSON)')
    p.add_argument('--input', required=True, help='Design vector, comma-separated or a JSON list')
    p.add_argument('--layers', action='store_true', help='Print every layer, not just the output')

    p = sub.add_parser('bounds', help='Compute preactivation bounds and print the stability census')
    _add_problem_flags(p, bounds_file=False)
    p.add_argument('--epsilon', type=float, help='Perturbation radius when the problem has a robustness field')

    p = sub.add_parser('invert', help='Globally optimal inverse design')
    _add_problem_flags(p)
    p.add_argument('--integer', action='store_true', help='Constrain every design input to integers')
    p.add_argument('--round-compare', action='store_true', help='Also report the rounded continuous optimum')
    p.add_argument('--dump-lp', help='Write the encoded model in LP format')

    p = sub.add_parser('select', help='Inverse design with a budget on the number of nonzero inputs')
    _add_problem_flags(p)
    p.add_argument('--budget', type=int, help='Selection budget (overrides the problem file)')
    p.add_argument('--dump-lp', help='Write the encoded model in LP format')

    p = sub.add_parser('robust', help='Provable worst-case deviation of candidate designs')
    _add_problem_flags(p)
    p.add_argument('--candidates', help='Candidate file; defaults to the problem\'s robustness candidate')
    p.add_argument('--epsilon', type=float, help='Perturbation radius (default 1e-3)')
    p.add_argument('--dump-lp', help='Write the first encoded model in LP format')

    p = sub.add_parser('hybrid', help='Branch-and-bound and gradient search together')
    _add_problem_flags(p)
    p.add_argument('--restarts', type=int, help='Gradient-search restarts')
    p.add_argument('--learning-rate', type=float, help='Adam learning rate')
    p.add_argument('--max-iters', type=int, help='Iterations per restart')
    p.add_argument('--trace', help='Gap-trace CSV output')

    p = sub.add_parser('bench', help='Solve time against network depth and width')
    p.add_argument('--sweep', choices=['depth', 'width', 'both'], default='both')
    p.add_argument('--repeats', type=int, help='Instances per size')
    p.add_argument('--time-limit', type=float, help='Time limit per solve')
    p.add_argument('--seed', type=int, help='Base seed of the synthetic networks')
    p.add_argument('--out', default='logs/bench.csv', help='Summary CSV (per-run rows go to <out>_runs.csv)')
    _add_bounds_flags(p)

    p = sub.add_parser('history', help='View recent runs')
    p.add_argument('--limit', type=int, default=10, help='Number of runs to show')
    p.add_argument('--filter-command', help='Only runs of this command')

    return parser


async def main(argv=None):
    """Main entry point"""
    args = build_parser().parse_args(argv)

    if args.debug:
        # Reconfigure logger for debug mode
        configure_logging(debug=True)
        logger.debug("DEBUG mode enabled")

    try:
        config = load_config(args.config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_INPUT

    ctx = RunContext(config=config, command=args.command)
    try:
        with logger.contextualize(run_id=ctx.run_id):
            logger.info(f"Starting {args.command} (run {ctx.run_id})")
            result = COMMANDS[args.command](ctx, args)
            if asyncio.iscoroutine(result):
                result = await result
            ctx.finish(result)
            return result

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 130
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return 1


if __name__ == "__main__":
    exit_code = asyncio.run(main())
    sys.exit(exit_code)
