"""
Command implementations behind main.py.

Every command takes ``(ctx, args)`` and returns an exit code; errors are
turned into exit codes by handle_command_errors.
"""

import json
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, ValidationError

from ..adjoint.gradient_search import AdjointConfig
from ..adjoint.hybrid import hybrid_solve
from ..analytics.reporter import (
    SOLUTION_FORMAT_VERSION,
    Reporter,
    format_census,
    format_table,
    solution_document,
    write_csv,
    write_json,
)
from ..bounds.cache import BoundsCache, bounds_digest
from ..bounds.table import BoundsTable, load_bounds
from ..bounds.tightening import BoundsConfig, compute_bounds
from ..encoding.encoder import EncodedProblem, decode, encode_problem, encode_robustness
from ..encoding.problem import InverseProblem, LinearConstraintSpec, load_candidates, load_problem, robustness_box
from ..encoding.rounding import nearest_feasible_integer
from ..errors import ConfigError, DimensionError, InfeasibleProblemError, ProblemError
from ..memory.store import RunStore
from ..milp.branch_and_bound import BnbConfig, SolveReport, solve_milp
from ..milp.lp_writer import write_lp
from ..network.io import load_network
from ..network.model import Network, evaluate, forward, l1_objective
from ..utils import EXIT_INFEASIBLE, EXIT_OK, exit_code_for_report, handle_command_errors
from .bench import RUN_COLUMNS, SUMMARY_COLUMNS, rank_correlation, run_bench, summarize
from .context import RunContext

DEFAULT_EPSILON = 1e-3


# -- shared plumbing ------------------------------------------------------


def _override(section: BaseModel, **updates) -> BaseModel:
    """Copy of a config section with the non-None CLI overrides applied and validated"""
    updates = {k: v for k, v in updates.items() if v is not None}
    try:
        return type(section).model_validate({**section.model_dump(), **updates})
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"invalid option {'.'.join(map(str, first['loc']))}: {first['msg']}") from e


def _solver_config(ctx: RunContext, args) -> BnbConfig:
    config = _override(
        ctx.config.solver,
        time_limit=getattr(args, "time_limit", None),
        gap_tol=getattr(args, "gap_tol", None),
        seed=getattr(args, "seed", None),
    )
    ctx.seed = config.seed
    return ctx.use_section("solver", config)


def _bounds_config(ctx: RunContext, args) -> BoundsConfig:
    config = _override(ctx.config.bounds, t_max=getattr(args, "t_max", None), jobs=getattr(args, "jobs", None))
    if getattr(args, "no_tighten", False):
        config = config.model_copy(update={"tighten": False})
    if getattr(args, "no_cache", False):
        config = config.model_copy(update={"cache_dir": None})
    return ctx.use_section("bounds", config)


def _load_network(ctx: RunContext, args) -> Network:
    return load_network(ctx.track_input(args.network))


def _load_problem(ctx: RunContext, path) -> InverseProblem:
    return load_problem(ctx.track_input(path))


def _obtain_bounds(
    ctx: RunContext,
    args,
    net: Network,
    lower: np.ndarray,
    upper: np.ndarray,
    extra_constraints: Sequence[LinearConstraintSpec],
    solver: BnbConfig,
) -> BoundsTable:
    """Bounds from ``--bounds``, the cache, or a fresh computation (then cached)"""
    if getattr(args, "bounds", None):
        table = load_bounds(ctx.track_input(args.bounds))
        logger.info(f"Using bounds from {args.bounds} ({table.unstable_count} unstable ReLUs)")
        return table

    config = _bounds_config(ctx, args)
    digest = bounds_digest(net, lower, upper, extra_constraints, "milp" if config.tighten else "interval")
    cache = BoundsCache(config.cache_dir) if config.cache_dir else None
    if cache is not None:
        table = cache.get(digest)
        if table is not None:
            return table

    started = time.perf_counter()
    table = compute_bounds(net, lower, upper, extra_constraints, config, solver)
    ctx.metrics.record_phase("bounds", time.perf_counter() - started)
    ctx.metrics.record_bounds(table)
    table.digest = digest
    if cache is not None:
        cache.put(table)
    return table


def _solve(ctx: RunContext, encoded: EncodedProblem, solver: BnbConfig, dump_lp: Optional[str] = None) -> SolveReport:
    if dump_lp:
        ctx.track_output(write_lp(encoded.model, dump_lp))
    started = time.perf_counter()
    report = solve_milp(encoded.model, solver)
    ctx.metrics.record_phase("solve", time.perf_counter() - started)
    ctx.record_report(report)
    return report


def _write_output(ctx: RunContext, args, document: dict) -> None:
    if getattr(args, "out", None):
        ctx.track_output(write_json(document, args.out), primary=True)
        logger.info(f"Solution saved to {args.out}")
    else:
        print(json.dumps(document, indent=2, sort_keys=True))


def _log_outcome(what: str, report: SolveReport) -> None:
    message = f"{what}: {report.status.value}, objective {report.incumbent_obj}, gap {report.gap:.3e}, {report.nodes_explored} nodes"
    if exit_code_for_report(report) == EXIT_OK:
        logger.success(message)
    else:
        logger.warning(message)


def _report_infeasible(ctx: RunContext, args, problem: InverseProblem) -> int:
    """Infeasible status document for an empty design box"""
    try:
        problem.require_nonempty_box()
        reason = "design domain is empty"
    except InfeasibleProblemError as e:
        reason = str(e)
    logger.error(f"[{ctx.run_id}] Problem is infeasible: {reason}")
    _write_output(
        ctx, args, {"format_version": SOLUTION_FORMAT_VERSION, "status": "infeasible", "objective": None, "reason": reason}
    )
    return EXIT_INFEASIBLE


def _parse_vector(text: str, what: str) -> np.ndarray:
    """Comma-separated numbers or a JSON list"""
    try:
        values = json.loads(text) if text.strip().startswith("[") else [float(v) for v in text.split(",")]
        return np.asarray(values, dtype=float)
    except (ValueError, TypeError) as e:
        raise ProblemError(f"cannot parse a numeric vector from {text!r}", location=what) from e


def _inverse_problem(ctx: RunContext, args, net: Network) -> InverseProblem:
    problem = _load_problem(ctx, args.problem)
    problem.check_against(net)
    if problem.robustness is not None:
        raise ProblemError("robustness queries run through the robust command", location="robustness")
    return problem


# -- commands ---------------------------------------------------------------


@handle_command_errors
def cmd_forward(ctx: RunContext, args) -> int:
    """Print the network output (and optionally every layer) for one design"""
    net = _load_network(ctx, args)
    x0 = _parse_vector(args.input, "--input")
    if args.layers:
        for l, values in enumerate(forward(net, x0)):
            print(f"layer {l}: {json.dumps(values.tolist())}")
    else:
        print(json.dumps(evaluate(net, x0).tolist()))
    return EXIT_OK


@handle_command_errors
def cmd_bounds(ctx: RunContext, args) -> int:
    """Compute (or fetch from cache) the bounds table and print its stability census"""
    net = _load_network(ctx, args)
    problem = _load_problem(ctx, args.problem)
    problem.check_against(net)
    solver = _solver_config(ctx, args)
    if problem.robustness is not None:
        spec = problem.robustness
        epsilon = spec.epsilon if args.epsilon is None else args.epsilon
        lower, upper = robustness_box(spec.candidate, epsilon, problem.lower, problem.upper)
        table = _obtain_bounds(ctx, args, net, lower, upper, (), solver)
        table.meta.update({"epsilon": float(epsilon), "candidate": list(spec.candidate)})
    else:
        problem.require_nonempty_box()
        table = _obtain_bounds(
            ctx, args, net, problem.lower_array, problem.upper_array, problem.extra_constraints, solver
        )

    if args.out:
        ctx.track_output(table.save(args.out), primary=True)
    print(format_census(table))
    logger.success(f"Bounds ready: {table.unstable_count} unstable ReLUs over {sum(table.widths)} nodes")
    return EXIT_OK


@handle_command_errors
def cmd_invert(ctx: RunContext, args) -> int:
    """Globally optimal inversion, optionally integer-constrained and compared against rounding"""
    net = _load_network(ctx, args)
    problem = _inverse_problem(ctx, args, net)
    if args.integer:
        problem = problem.model_copy(update={"integer": [True] * problem.input_dim})
    if problem.is_empty_box:
        return _report_infeasible(ctx, args, problem)

    solver = _solver_config(ctx, args)
    bounds = _obtain_bounds(ctx, args, net, problem.lower_array, problem.upper_array, problem.extra_constraints, solver)
    encoded = encode_problem(net, bounds, problem)
    report = _solve(ctx, encoded, solver, args.dump_lp)

    extra = None
    if args.round_compare:
        extra = {"round_compare": _round_compare(ctx, net, bounds, problem, report, solver)}
    _write_output(ctx, args, solution_document(encoded, report, extra))
    _log_outcome("Inversion", report)
    return exit_code_for_report(report)


def _round_compare(
    ctx: RunContext, net: Network, bounds: BoundsTable, problem: InverseProblem, integer_report: SolveReport, solver: BnbConfig
) -> dict:
    """Continuous optimum, its nearest feasible integer rounding and the integer optimum side by side"""
    if not problem.is_integer:
        raise ProblemError("--round-compare needs integer design inputs (use --integer or integer flags)")
    continuous = encode_problem(net, bounds, problem.continuous())
    report = solve_milp(continuous.model, solver)
    ctx.metrics.record_solve(report)
    comparison = {
        "continuous_objective": report.incumbent_obj,
        "integer_objective": integer_report.incumbent_obj,
        "rounded_objective": None,
        "rounded_designs": None,
    }
    if not report.has_incumbent:
        return comparison
    rounded = [nearest_feasible_integer(problem, design, solver) for design in decode(continuous, report.x).designs]
    if any(r is None for r in rounded):
        return comparison
    comparison["rounded_designs"] = [[float(v) for v in r] for r in rounded]
    comparison["rounded_objective"] = float(
        sum(l1_objective(net, r, t) for r, t in zip(rounded, problem.target_arrays))
    )
    logger.info(
        f"Rounded continuous optimum: {comparison['rounded_objective']:.6g}, "
        f"integer optimum: {comparison['integer_objective']}"
    )
    return comparison


@handle_command_errors
def cmd_select(ctx: RunContext, args) -> int:
    """Inversion with at most ``budget`` nonzero design inputs shared by all targets"""
    net = _load_network(ctx, args)
    problem = _inverse_problem(ctx, args, net)
    budget = args.budget if args.budget is not None else problem.selection_budget
    if budget is None:
        raise ProblemError("no selection budget: set selection_budget in the problem or pass --budget")
    try:
        problem = InverseProblem.model_validate({**problem.model_dump(), "selection_budget": budget})
    except ValidationError as e:
        raise ProblemError(e.errors()[0]["msg"], location="selection_budget") from e
    if problem.is_empty_box:
        return _report_infeasible(ctx, args, problem)

    solver = _solver_config(ctx, args)
    bounds = _obtain_bounds(ctx, args, net, problem.lower_array, problem.upper_array, problem.extra_constraints, solver)
    encoded = encode_problem(net, bounds, problem)
    report = _solve(ctx, encoded, solver, args.dump_lp)
    document = solution_document(encoded, report)
    _write_output(ctx, args, document)
    if document["selected"] is not None:
        logger.info(f"Selected inputs (budget {budget}): {document['selected']}")
    _log_outcome("Selection", report)
    return exit_code_for_report(report)


@handle_command_errors
def cmd_robust(ctx: RunContext, args) -> int:
    """Provable worst-case deviation of each candidate design, ranked from most to least robust"""
    net = _load_network(ctx, args)
    problem = _load_problem(ctx, args.problem)
    problem.check_against(net)
    if args.epsilon is not None:
        epsilon = args.epsilon
    elif problem.robustness is not None:
        epsilon = problem.robustness.epsilon
    else:
        epsilon = DEFAULT_EPSILON

    if args.candidates:
        candidate_file = load_candidates(ctx.track_input(args.candidates))
        candidates = candidate_file.candidates
        labels = candidate_file.labels or [f"candidate_{i}" for i in range(len(candidates))]
    elif problem.robustness is not None:
        candidates, labels = [problem.robustness.candidate], ["candidate_0"]
    else:
        raise ProblemError("no candidate designs: pass --candidates or a problem with a robustness field")

    solver = _solver_config(ctx, args)
    entries: List[dict] = []
    exit_code = EXIT_OK
    for label, candidate in zip(labels, candidates):
        if len(candidate) != problem.input_dim:
            raise DimensionError(f"{label} has {len(candidate)} entries, network expects {problem.input_dim}", layer=0)
        lower, upper = robustness_box(candidate, epsilon, problem.lower, problem.upper)
        bounds = _obtain_bounds(ctx, args, net, lower, upper, (), solver)
        per_target = []
        for target in problem.target_arrays:
            encoded = encode_robustness(net, bounds, candidate, epsilon, target, problem.lower, problem.upper)
            # only the first encoding is dumped
            first = not entries and not per_target
            report = _solve(ctx, encoded, solver, args.dump_lp if first else None)
            exit_code = max(exit_code, exit_code_for_report(report))
            per_target.append((report, solution_document(encoded, report)))
        reports = [r for r, _ in per_target]
        worst = None if any(r.incumbent_obj is None for r in reports) else sum(r.incumbent_obj for r in reports)
        entries.append(
            {
                "label": label,
                "candidate": [float(v) for v in candidate],
                "nominal": float(sum(l1_objective(net, candidate, t) for t in problem.target_arrays)),
                "worst_case": worst,
                "worst_case_bound": float(sum(r.relaxed_bound for r in reports)),
                "status": [r.status.value for r in reports],
                "solutions": [doc for _, doc in per_target],
            }
        )
    ranked = sorted(entries, key=lambda e: (e["worst_case"] is None, e["worst_case"] or 0.0, e["label"]))
    print(
        format_table(
            ["Rank", "Candidate", "Nominal", "Worst case", "Bound"],
            [
                [i, e["label"], f"{e['nominal']:.6g}", "-" if e["worst_case"] is None else f"{e['worst_case']:.6g}", f"{e['worst_case_bound']:.6g}"]
                for i, e in enumerate(ranked, 1)
            ],
        )
    )
    document = {
        "format_version": SOLUTION_FORMAT_VERSION,
        "mode": "robustness",
        "epsilon": epsilon,
        "candidates": entries,
        "ranking": [e["label"] for e in ranked],
    }
    if args.out:
        _write_output(ctx, args, document)
    logger.success(f"Assessed {len(entries)} candidate(s) at epsilon {epsilon}; most robust: {ranked[0]['label']}")
    return exit_code


def _adjoint_config(ctx: RunContext, args) -> AdjointConfig:
    config = _override(
        ctx.config.adjoint,
        restarts=getattr(args, "restarts", None),
        learning_rate=getattr(args, "learning_rate", None),
        max_iters=getattr(args, "max_iters", None),
        seed=getattr(args, "seed", None),
    )
    return ctx.use_section("adjoint", config)


@handle_command_errors
async def cmd_hybrid(ctx: RunContext, args) -> int:
    """Branch-and-bound and gradient search together, with an optional gap-trace CSV"""
    net = _load_network(ctx, args)
    problem = _inverse_problem(ctx, args, net)
    if problem.is_empty_box:
        return _report_infeasible(ctx, args, problem)

    solver = _solver_config(ctx, args)
    adjoint = _adjoint_config(ctx, args)
    bounds = _obtain_bounds(ctx, args, net, problem.lower_array, problem.upper_array, problem.extra_constraints, solver)
    result = await hybrid_solve(net, bounds, problem, adjoint, solver)
    ctx.record_report(result.report)
    ctx.metrics.record_injections(result.injections)

    extra = {
        "adjoint": {
            "objective": result.adjoint.objective if result.adjoint else None,
            "restarts": len(result.adjoint.restarts) if result.adjoint else 0,
        },
        "injections": {
            "offered": len(result.injections),
            "accepted": sum(1 for i in result.injections if i["accepted"]),
        },
    }
    _write_output(ctx, args, solution_document(result.encoded, result.report, extra))
    if args.trace:
        ctx.track_output(result.trace.to_csv(args.trace))
    reached = result.trace.first_time_below(solver.gap_tol)
    if reached is not None:
        logger.info(f"Gap {solver.gap_tol:g} reached after {reached:.3f}s")
    _log_outcome("Hybrid", result.report)
    return exit_code_for_report(result.report)


@handle_command_errors
def cmd_bench(ctx: RunContext, args) -> int:
    """Depth and width sweeps on synthetic networks, written as CSV"""
    bench = _override(
        ctx.config.bench,
        repeats=getattr(args, "repeats", None),
        time_limit=getattr(args, "time_limit", None),
        seed=getattr(args, "seed", None),
    )
    ctx.seed = bench.seed
    ctx.use_section("bench", bench)
    sweeps = ("depth", "width") if args.sweep == "both" else (args.sweep,)
    rows = run_bench(bench, _bounds_config(ctx, args), ctx.config.solver, sweeps)
    for row in rows:
        ctx.metrics.record_phase("bench_solve", row["solve_time"])

    out = Path(args.out)
    summary = summarize(rows)
    ctx.track_output(write_csv(summary, SUMMARY_COLUMNS, out), primary=True)
    ctx.track_output(write_csv(rows, RUN_COLUMNS, out.with_name(f"{out.stem}_runs{out.suffix}")))
    for sweep in sweeps:
        points = [s for s in summary if s["sweep"] == sweep]
        size = [p["depth"] if sweep == "depth" else p["width"] for p in points]
        trend = rank_correlation(size, [p["mean_time"] for p in points])
        logger.info(f"{sweep} sweep: rank correlation of size and mean solve time {trend:+.2f}")
    print(format_table(SUMMARY_COLUMNS, [[s[c] if not isinstance(s[c], float) else f"{s[c]:.4g}" for c in SUMMARY_COLUMNS] for s in summary]))
    logger.success(f"Bench finished: {len(rows)} solves")
    return EXIT_OK


@handle_command_errors
def cmd_history(ctx: RunContext, args) -> int:
    """Show the most recent runs"""
    Reporter(RunStore(ctx.config.output.history_path)).display_recent_runs(args.limit, args.filter_command)
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward,
    "bounds": cmd_bounds,
    "invert": cmd_invert,
    "select": cmd_select,
    "robust": cmd_robust,
    "hybrid": cmd_hybrid,
    "bench": cmd_bench,
    "history": cmd_history,
}
