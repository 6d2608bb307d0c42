#!/usr/bin/env python3
"""
TractLab Base - Shared Error Types and Bound Records
Exception hierarchy, inequality records and t-grid helpers shared by every module
"""

import logging
from dataclasses import dataclass, field, asdict
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class TractLabError(Exception):
    """Base class for every error raised by the library"""


class GeometryError(TractLabError):
    """Unknown surface, degenerate metric or undefined pointwise quantity"""


class LevelSetError(TractLabError):
    """Level extraction failures (near-critical level, empty input)"""

    def __init__(self, message: str, level: Optional[float] = None):
        super().__init__(message)
        self.level = level


class FrequencyError(TractLabError):
    """Undefined frequency, invalid weights or eigen-solver failure"""


class FlowError(TractLabError):
    """Flow not constant across levels, or open arcs at a tubular level"""

    def __init__(self, message: str, values: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.values = list(values) if values is not None else []


class CapacityError(TractLabError):
    """Invalid capacitor radii"""


class NotRegularDirectionError(TractLabError):
    """A hyperplane section has a compact component"""

    def __init__(self, message: str, witness: Optional[Dict] = None):
        super().__init__(message)
        self.witness = witness or {}


class CriticalValueError(TractLabError):
    """A sampled threshold is (numerically) a critical value"""

    def __init__(self, message: str, value: Optional[float] = None):
        super().__init__(message)
        self.value = value


class ProjectionError(TractLabError):
    """Projection not proper at the requested radius, or t-grid too short"""


class ConfigError(TractLabError):
    """Invalid run configuration"""

    def __init__(self, message: str, problems: Optional[List[str]] = None):
        super().__init__(message)
        self.problems = problems or []


class ComparisonError(TractLabError):
    """Reports cannot be compared"""


@dataclass
class BoundCheck:
    """
    One numerically checked inequality ``lhs <relation> rhs``.

    The slack allowed is ``max(rel_tol * |rhs|, abs_tol)``.
    """
    name: str
    lhs: float
    rhs: float
    relation: str = "<="
    rel_tol: float = 0.0
    abs_tol: float = 0.0
    satisfied: bool = field(init=False)

    def __post_init__(self):
        if self.relation not in ("<=", ">="):
            raise ValueError(f"Unsupported relation: {self.relation}")
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        slack = max(self.rel_tol * abs(self.rhs), self.abs_tol)
        if not (np.isfinite(self.lhs) and np.isfinite(self.rhs)):
            self.satisfied = False
        elif self.relation == "<=":
            self.satisfied = bool(self.lhs <= self.rhs + slack)
        else:
            self.satisfied = bool(self.lhs >= self.rhs - slack)

    @property
    def tolerance(self) -> Dict[str, float]:
        return {"rel": self.rel_tol, "abs": self.abs_tol}

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["lhs"] = _json_float(self.lhs)
        data["rhs"] = _json_float(self.rhs)
        return data


def _json_float(value: float):
    if np.isfinite(value):
        return float(value)
    return "inf" if value > 0 else ("-inf" if value < 0 else "nan")


def make_t_grid(start: float, stop: float, num: int, spacing: str = "log") -> np.ndarray:
    """
    Build an increasing grid of exhaustion levels.

    Args:
        start: First level (> 0 for log spacing)
        stop: Last level
        num: Number of samples (>= 2)
        spacing: "log" or "linear"

    Returns:
        Increasing array of levels
    """
    if num < 2 or not stop > start:
        raise ValueError(f"Invalid t-grid: start={start}, stop={stop}, num={num}")
    if spacing == "log":
        if start <= 0:
            raise ValueError("Log-spaced grids need a positive start")
        return np.geomspace(start, stop, num)
    if spacing == "linear":
        return np.linspace(start, stop, num)
    raise ValueError(f"Unknown spacing: {spacing}")


def avoid_values(grid: np.ndarray, critical: Iterable[float], clearance: float) -> np.ndarray:
    """Drop grid samples lying within ``clearance`` of a critical value."""
    grid = np.asarray(grid, dtype=float)
    critical = np.asarray(list(critical), dtype=float)
    if critical.size == 0 or clearance <= 0:
        return grid
    keep = np.min(np.abs(grid[:, None] - critical[None, :]), axis=1) > clearance
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        logger.debug(f"Dropped {dropped} samples near critical values {critical.tolist()}")
    return grid[keep]


def relative_difference(a: float, b: float) -> float:
    """Symmetric relative difference, 0 for two zeros."""
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale
