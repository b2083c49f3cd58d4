"""Solve time against network depth and width on seeded synthetic networks"""

from collections import defaultdict
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..bounds.tightening import BoundsConfig, compute_bounds
from ..config import BenchConfig
from ..encoding.encoder import encode_problem
from ..encoding.problem import InverseProblem
from ..milp.branch_and_bound import BnbConfig, solve_milp
from ..network.model import Network, evaluate
from ..network.synthetic import random_network

RUN_COLUMNS = [
    "sweep", "depth", "width", "repeat", "seed", "unstable",
    "bounds_time", "solve_time", "status", "objective", "gap", "nodes",
]
SUMMARY_COLUMNS = ["sweep", "depth", "width", "runs", "mean_time", "gap", "mean_unstable"]


def instance_seed(base: int, depth: int, width: int, repeat: int) -> int:
    return int(np.random.SeedSequence([base, depth, width, repeat]).generate_state(1)[0])


def bench_instance(config: BenchConfig, depth: int, width: int, repeat: int) -> Tuple[Network, InverseProblem, int]:
    """Random network plus a near-reachable target on the unit box"""
    seed = instance_seed(config.seed, depth, width, repeat)
    net = random_network(config.input_dim, [width] * depth, config.output_dim, seed=seed)
    rng = np.random.default_rng(seed)
    x_star = rng.uniform(0.0, 1.0, size=config.input_dim)
    target = evaluate(net, x_star) + rng.normal(0.0, 0.05, size=config.output_dim)
    problem = InverseProblem(
        targets=[target.tolist()], lower=[0.0] * config.input_dim, upper=[1.0] * config.input_dim
    )
    return net, problem, seed


def sweep_sizes(config: BenchConfig, sweep: str) -> List[Tuple[int, int]]:
    if sweep == "depth":
        return [(d, config.depth_width) for d in config.depths]
    if sweep == "width":
        return [(config.width_depth, w) for w in config.widths]
    raise ValueError(f"unknown sweep {sweep!r}")


def run_bench(
    config: BenchConfig,
    bounds_config: BoundsConfig,
    solver_config: BnbConfig,
    sweeps: Iterable[str] = ("depth", "width"),
    on_row: Optional[Callable[[dict], None]] = None,
) -> List[dict]:
    """
    Bounds plus inversion on every instance of the requested sweeps

    Args:
        config: Sweep definition (sizes, repeats, seeds, time limits)
        bounds_config: Bound settings; ``t_max`` is replaced by ``config.bounds_t_max``
        solver_config: Solver tolerances; ``time_limit`` is replaced by ``config.time_limit``
        sweeps: ``"depth"`` and/or ``"width"``
        on_row: Called with each finished row

    Returns:
        One row per solved instance (see RUN_COLUMNS)
    """
    bounds_config = bounds_config.model_copy(update={"t_max": config.bounds_t_max})
    solver_config = solver_config.model_copy(update={"time_limit": config.time_limit})
    rows = []
    for sweep in sweeps:
        for depth, width in sweep_sizes(config, sweep):
            for repeat in range(config.repeats):
                net, problem, seed = bench_instance(config, depth, width, repeat)
                bounds = compute_bounds(net, problem.lower_array, problem.upper_array, (), bounds_config, solver_config)
                encoded = encode_problem(net, bounds, problem)
                report = solve_milp(encoded.model, solver_config)
                row = {
                    "sweep": sweep,
                    "depth": depth,
                    "width": width,
                    "repeat": repeat,
                    "seed": seed,
                    "unstable": bounds.unstable_count,
                    "bounds_time": round(float(bounds.meta.get("wall_time", 0.0)), 6),
                    "solve_time": round(report.wall_time, 6),
                    "status": report.status.value,
                    "objective": report.incumbent_obj,
                    "gap": report.gap,
                    "nodes": report.nodes_explored,
                }
                logger.info(
                    f"Bench {sweep} depth={depth} width={width} repeat={repeat}: "
                    f"{row['status']} in {row['solve_time']:.3f}s, {row['unstable']} unstable ReLUs"
                )
                rows.append(row)
                if on_row is not None:
                    on_row(row)
    return rows


def summarize(rows: Sequence[dict]) -> List[dict]:
    """Mean solve time and worst gap per (sweep, depth, width)"""
    groups = defaultdict(list)
    for row in rows:
        groups[(row["sweep"], row["depth"], row["width"])].append(row)
    summary = []
    for (sweep, depth, width), group in groups.items():
        summary.append(
            {
                "sweep": sweep,
                "depth": depth,
                "width": width,
                "runs": len(group),
                "mean_time": float(np.mean([r["solve_time"] for r in group])),
                "gap": float(max(r["gap"] for r in group)),
                "mean_unstable": float(np.mean([r["unstable"] for r in group])),
            }
        )
    return summary


def rank_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman correlation (average ranks for ties)"""

    def ranks(values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        order = np.argsort(values, kind="stable")
        r = np.empty(len(values))
        r[order] = np.arange(len(values), dtype=float)
        for v in np.unique(values):
            tied = values == v
            r[tied] = r[tied].mean()
        return r

    rx, ry = ranks(x), ranks(y)
    if len(rx) < 2 or rx.std() == 0 or ry.std() == 0:
        return 0.0
    return float(np.corrcoef(rx, ry)[0, 1])
