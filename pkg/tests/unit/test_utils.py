"""Unit tests for digests, exit codes and the command error decorator"""

import argparse
import math

import pytest

from src.analytics.metrics import RunMetrics
from src.errors import (
    BoundsError,
    ConfigError,
    EncodingError,
    InfeasibleProblemError,
    LpNumericalError,
    NetworkFormatError,
    OracleLimitError,
    ProblemError,
)
from src.milp.branch_and_bound import SolveReport, SolveStatus
from src.utils import (
    EXIT_INFEASIBLE,
    EXIT_INPUT,
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_TIME_LIMIT,
    exit_code_for,
    exit_code_for_report,
    file_digest,
    handle_command_errors,
    sha256_digest,
)


class _Ctx:
    run_id = "test"

    def __init__(self):
        self.metrics = RunMetrics()


class TestDigests:
    """Content digests"""

    def test_length_prefix_separates_parts(self):
        assert sha256_digest(b"ab", b"c") != sha256_digest(b"a", b"bc")

    def test_file_digest(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.write_bytes(b"same")
        b.write_bytes(b"same")
        assert file_digest(a) == file_digest(b)
        assert len(file_digest(a)) == 64


class TestExitCodes:
    """Exception and report to exit code"""

    @pytest.mark.parametrize(
        "error, code",
        [
            (InfeasibleProblemError("empty"), EXIT_INFEASIBLE),
            (ProblemError("bad"), EXIT_INPUT),
            (NetworkFormatError("bad"), EXIT_INPUT),
            (EncodingError("bad"), EXIT_INPUT),
            (BoundsError("bad"), EXIT_INPUT),
            (ConfigError("bad"), EXIT_INPUT),
            (OracleLimitError("big"), EXIT_INPUT),
            (LpNumericalError("pivot"), EXIT_INTERNAL),
            (RuntimeError("boom"), EXIT_INTERNAL),
        ],
    )
    def test_errors(self, error, code):
        assert exit_code_for(error) == code

    @pytest.mark.parametrize(
        "status, code",
        [
            (SolveStatus.OPTIMAL, EXIT_OK),
            (SolveStatus.FEASIBLE, EXIT_TIME_LIMIT),
            (SolveStatus.TIME_LIMIT, EXIT_TIME_LIMIT),
            (SolveStatus.INFEASIBLE, EXIT_INFEASIBLE),
            (SolveStatus.UNBOUNDED, EXIT_INTERNAL),
        ],
    )
    def test_reports(self, status, code):
        report = SolveReport(status=status, relaxed_bound=0.0, gap=math.inf)
        assert exit_code_for_report(report) == code


class TestHandleCommandErrors:
    """Command error decorator"""

    def test_passes_result_through(self):
        @handle_command_errors
        def cmd_ok(ctx, args):
            return EXIT_OK

        assert cmd_ok(_Ctx(), argparse.Namespace()) == EXIT_OK

    def test_maps_error_and_records_failure(self):
        @handle_command_errors
        def cmd_bad(ctx, args):
            raise ProblemError("targets missing", location="targets")

        ctx = _Ctx()
        assert cmd_bad(ctx, argparse.Namespace(network="net.json")) == EXIT_INPUT
        failure = ctx.metrics.get_summary()["failures"][0]
        assert failure["type"] == "ProblemError"
        assert failure["component"] == "cmd_bad"
        assert failure["context"]["args"] == {"network": "net.json"}

    @pytest.mark.asyncio
    async def test_async_command(self):
        @handle_command_errors
        async def cmd_async(ctx, args):
            raise InfeasibleProblemError("empty box")

        assert await cmd_async(_Ctx(), argparse.Namespace()) == EXIT_INFEASIBLE
