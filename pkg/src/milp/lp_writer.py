"""Debug dump of a MilpModel in the LP text format read by external solvers"""

import math
import re
from pathlib import Path
from typing import Iterable, List, Tuple, Union

from loguru import logger

from .model import ConstraintSense, MilpModel, ObjectiveSense, VarKind

_LINE_WIDTH = 240
_BAD_CHARS = re.compile(r"[^A-Za-z0-9_.\[\]]")


def _lp_name(name: str, index: int) -> str:
    clean = _BAD_CHARS.sub("_", name) or f"x{index}"
    if clean[0].isdigit() or clean[0] in ".eE":
        clean = f"v_{clean}"
    return clean


def _format_number(value: float) -> str:
    return repr(float(value))


def _expression(coeffs: Iterable[Tuple[int, float]], names: List[str]) -> List[str]:
    terms = []
    for index, value in coeffs:
        sign = "-" if value < 0 else "+"
        terms.append(f"{sign} {_format_number(abs(value))} {names[index]}")
    if not terms and names:
        return [f"0 {names[0]}"]
    return terms


def _wrap(prefix: str, terms: List[str], suffix: str = "") -> List[str]:
    lines, current = [], prefix
    for term in terms:
        if len(current) + len(term) + 1 > _LINE_WIDTH:
            lines.append(current)
            current = "   "
        current += " " + term
    lines.append(current + suffix)
    return lines


def model_to_lp(model: MilpModel) -> str:
    """Render ``model`` as LP text (objective, constraints, bounds, generals, binaries)"""
    names = [_lp_name(v.name, i) for i, v in enumerate(model.variables)]
    seen = {}
    for i, name in enumerate(names):
        if name in seen:
            names[i] = f"{name}_{i}"
        seen[names[i]] = i

    lines = [f"\\ {model.name}"]
    if model.objective_constant:
        lines.append(f"\\ objective constant {_format_number(model.objective_constant)} omitted")
    lines.append("Maximize" if model.sense is ObjectiveSense.MAXIMIZE else "Minimize")
    lines.extend(_wrap(" obj:", _expression(model.objective, names)))

    lines.append("Subject To")
    for constraint in model.constraints:
        sense = {ConstraintSense.LE: "<=", ConstraintSense.GE: ">=", ConstraintSense.EQ: "="}[constraint.sense]
        label = _lp_name(constraint.name, 0)
        lines.extend(
            _wrap(f" {label}:", _expression(constraint.coeffs, names), f" {sense} {_format_number(constraint.rhs)}")
        )

    lines.append("Bounds")
    for name, var in zip(names, model.variables):
        if var.kind is VarKind.BINARY:
            continue
        lower, upper = var.lower, var.upper
        if math.isinf(lower) and math.isinf(upper):
            lines.append(f" {name} free")
        elif math.isinf(upper):
            lines.append(f" {name} >= {_format_number(lower)}")
        elif math.isinf(lower):
            lines.append(f" -inf <= {name} <= {_format_number(upper)}")
        else:
            lines.append(f" {_format_number(lower)} <= {name} <= {_format_number(upper)}")

    generals = [n for n, v in zip(names, model.variables) if v.kind is VarKind.INTEGER]
    binaries = [n for n, v in zip(names, model.variables) if v.kind is VarKind.BINARY]
    if generals:
        lines.append("Generals")
        lines.extend(_wrap("", generals))
    if binaries:
        lines.append("Binaries")
        lines.extend(_wrap("", binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(model: MilpModel, path: Union[str, Path]) -> Path:
    """Write the LP dump of ``model`` to ``path``"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model_to_lp(model), encoding="utf-8")
    logger.info(f"Wrote LP dump of {model!r} to {path}")
    return path
