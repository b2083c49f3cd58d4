import asyncio
import hashlib
from functools import wraps
from pathlib import Path
from typing import Union

from loguru import logger

from .errors import (
    BoundsError,
    ConfigError,
    EncodingError,
    InfeasibleProblemError,
    NetworkError,
    OracleLimitError,
    ProblemError,
)
from .milp.branch_and_bound import SolveReport, SolveStatus

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_TIME_LIMIT = 2
EXIT_INFEASIBLE = 3
EXIT_INPUT = 4

_INPUT_ERRORS = (NetworkError, ProblemError, EncodingError, BoundsError, ConfigError, OracleLimitError)


def sha256_digest(*parts: bytes) -> str:
    """Hex digest of the length-prefixed concatenation of ``parts``"""
    h = hashlib.sha256()
    for part in parts:
        h.update(len(part).to_bytes(8, "little"))
        h.update(part)
    return h.hexdigest()


def file_digest(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def exit_code_for(error: BaseException) -> int:
    """Documented exit code for an exception raised by a command"""
    if isinstance(error, InfeasibleProblemError):
        return EXIT_INFEASIBLE
    if isinstance(error, _INPUT_ERRORS):
        return EXIT_INPUT
    return EXIT_INTERNAL


def exit_code_for_report(report: SolveReport) -> int:
    """0 for a certified optimum, 2 when a limit stopped the search, 3 when infeasible"""
    if report.status is SolveStatus.OPTIMAL:
        return EXIT_OK
    if report.status is SolveStatus.INFEASIBLE:
        return EXIT_INFEASIBLE
    if report.status in (SolveStatus.TIME_LIMIT, SolveStatus.FEASIBLE):
        return EXIT_TIME_LIMIT
    return EXIT_INTERNAL


def handle_command_errors(command_func):
    """
    A decorator for CLI commands taking ``(ctx, args)``.
    Errors are logged with the run id, recorded in ``ctx.metrics`` and
    turned into the documented exit code instead of a traceback.
    """
    def _failed(ctx, args, e: Exception) -> int:
        code = exit_code_for(e)
        run_id = getattr(ctx, "run_id", "N/A")
        error_message = f"{command_func.__name__} failed: {e}"
        if code == EXIT_INTERNAL:
            logger.exception(f"[{run_id}] {error_message}")
        else:
            logger.error(f"[{run_id}] {error_message}")
        metrics = getattr(ctx, "metrics", None)
        if metrics is not None:
            metrics.record_failure(
                failure_type=type(e).__name__,
                component=command_func.__name__,
                reason=str(e),
                context={"exit_code": code, "args": {k: str(v) for k, v in vars(args).items()}},
            )
        return code

    if asyncio.iscoroutinefunction(command_func):
        @wraps(command_func)
        async def async_wrapper(ctx, args) -> int:
            try:
                return await command_func(ctx, args)
            except Exception as e:
                return _failed(ctx, args, e)
        return async_wrapper

    @wraps(command_func)
    def wrapper(ctx, args) -> int:
        try:
            return command_func(ctx, args)
        except Exception as e:
            return _failed(ctx, args, e)
    return wrapper
