#!/usr/bin/env python3
"""
TractLab Core - Suite Orchestration
Run configuration, validation, theorem suites across the surface catalog
and report emission shared by the CLI, the benchmarks and the workflows
"""

import csv
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

# Third-party imports
try:
    from dotenv import load_dotenv
    from tqdm import tqdm
except ImportError as e:
    raise ImportError(f"Missing required package: {e}. Install with: pip install python-dotenv tqdm")

from tractlab_base import (BoundCheck, ComparisonError, ConfigError, FlowError, GeometryError,
                           TractLabError, make_t_grid, relative_difference)
from tractlab_energy import (SurfaceQuadrature, capacity_closed_form, capacity_variational, energy_profile,
                             full_flow, growth_energy_check, dirichlet_capacity_check)
from tractlab_geometry import (CATALOG_NAMES, DEFAULT_BOXES, GRAPH_PROFILES, ParameterBox, SampleGrid,
                               SurfaceChart, abs_coordinate_field, alpha_minimality_residual, box_for_radius,
                               catalog_surface, coordinate_field, derivative_check, distortion_bound,
                               exhaustion_check, gauss_map_distortion, norm_field)
from tractlab_invariants import (ProjectiveVolumeEstimate, bernstein_bounds, find_critical_points,
                                 index_theorem_check, projection_multiplicity_integral, projective_volume,
                                 tubular_growth_check)
from tractlab_levelset import extract_level_set
from tractlab_spectra import frequency_rows, fundamental_frequency, n_mean_lower_bound
from tractlab_tracts import (build_tract_forest, classify_tract, denjoy_ahlfors_bound, forest_is_nested,
                             forest_maximum_principle, hump_count, main_inequality_checks, tract_count_checks)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

SUITES = ("frequency", "energy", "tracts", "main_inequality", "tubular",
          "projective_volume", "humps", "index", "bernstein", "distortion")

ENV_THREADS = "TRACTLAB_THREADS"
ENV_OUTPUT_DIR = "TRACTLAB_OUTPUT_DIR"
ENV_LOG_LEVEL = "TRACTLAB_LOG_LEVEL"


@dataclass
class RunConfig:
    """One TractLab run: a catalog surface, its sampling and the suites to evaluate."""
    surface: str = "catenoid"
    profile: Optional[str] = None
    box: Optional[List[float]] = None
    radius: Optional[float] = 10.0
    direction: List[float] = field(default_factory=lambda: [1.0, 0.0, 0.0])
    alpha: float = 2.0
    grid: List[int] = field(default_factory=lambda: [128, 200])
    t_grid: Dict[str, Any] = field(default_factory=lambda: {"start": 2.0, "stop": 6.0, "num": 9,
                                                            "spacing": "linear"})
    tau_grid: List[float] = field(default_factory=lambda: [2.0, 4.0, 8.0])
    exhaustion: str = "norm"
    suites: List[str] = field(default_factory=lambda: ["projective_volume"])
    output_dir: str = "tractlab_output"
    seed: int = 0
    slab: float = 2.0
    probe_tracts: int = 12
    volume_radius: float = 1000.0
    volume_grid: List[int] = field(default_factory=lambda: [256, 400])
    multiplicity_radii: List[float] = field(default_factory=lambda: [10.0, 100.0])
    projection_normal: List[float] = field(default_factory=lambda: [0.0, 0.0, 1.0])
    n_theta: int = 128
    threads: Optional[int] = None
    export_obj: bool = False

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}", unknown)
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class ConfigManager:
    """Configuration management for TractLab runs"""

    @staticmethod
    def load_environment() -> Dict[str, str]:
        """Load .env (if present) and return the TractLab variables that are set."""
        load_dotenv()
        return {key: os.environ[key] for key in (ENV_THREADS, ENV_OUTPUT_DIR, ENV_LOG_LEVEL)
                if os.environ.get(key)}

    @staticmethod
    def load_config_file(config_path: Path) -> Dict[str, Any]:
        """
        Load a JSON run configuration

        Args:
            config_path: Path to the JSON document

        Returns:
            Dict with configuration values (empty when the file is missing)

        Raises:
            ConfigError: unreadable or malformed document
        """
        if not config_path.exists():
            logger.warning(f"Config file not found, using defaults: {config_path}")
            return {}
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Error reading config file {config_path}: {e}", [str(e)])
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {config_path} must hold a JSON object")
        return data

    @staticmethod
    def save_config(config_path: Path, config: RunConfig):
        """Write a normalized JSON copy of the configuration."""
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, "w", encoding="utf-8") as f:
            json.dump(config.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def build(cls, config_path: Optional[Path] = None,
              overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """
        Merge defaults, environment, the JSON document and CLI overrides (CLI wins).
        """
        env = cls.load_environment()
        data: Dict[str, Any] = {}
        if ENV_OUTPUT_DIR in env:
            data["output_dir"] = env[ENV_OUTPUT_DIR]
        if config_path is not None:
            data.update(cls.load_config_file(Path(config_path)))
        for key, value in (overrides or {}).items():
            if value is not None:
                data[key] = value
        config = RunConfig.from_dict(data)
        ConfigValidator.validate(config)
        return config

    @staticmethod
    def thread_cap(config: Optional[RunConfig] = None) -> int:
        """Worker count: config, then TRACTLAB_THREADS, then min(4, cpu count)."""
        if config is not None and config.threads:
            return max(1, int(config.threads))
        value = os.environ.get(ENV_THREADS)
        if value:
            try:
                return max(1, int(value))
            except ValueError:
                logger.warning(f"Ignoring non-integer {ENV_THREADS}={value!r}")
        return min(4, os.cpu_count() or 1)


class ConfigValidator:
    """Validation of RunConfig invariants"""

    @staticmethod
    def problems(config: RunConfig) -> List[str]:
        problems = []
        if config.surface not in CATALOG_NAMES:
            problems.append(f"unknown surface {config.surface!r}")
        elif config.surface == "graph" and config.profile not in GRAPH_PROFILES:
            problems.append(f"graph surfaces need a profile from {sorted(GRAPH_PROFILES)}")
        if not config.alpha > 1.0:
            problems.append(f"alpha must exceed 1, got {config.alpha}")
        for name in ("grid", "volume_grid"):
            value = getattr(config, name)
            if len(value) != 2 or any(int(n) != n or n < 4 for n in value):
                problems.append(f"{name} must be two node counts >= 4, got {value}")
        if config.box is not None and (len(config.box) != 4 or not (config.box[1] > config.box[0]
                                                                    and config.box[3] > config.box[2])):
            problems.append(f"box must be [u0, u1, v0, v1] with u0 < u1 and v0 < v1, got {config.box}")
        if config.box is None and config.radius is not None and not config.radius > 0:
            problems.append(f"radius must be positive, got {config.radius}")
        try:
            make_t_grid(**config.t_grid)
        except (TypeError, ValueError) as e:
            problems.append(f"invalid t_grid {config.t_grid}: {e}")
        tau = np.asarray(config.tau_grid, dtype=float)
        if tau.size == 0 or np.any(np.diff(tau) <= 0):
            problems.append(f"tau_grid must be non-empty and strictly increasing, got {config.tau_grid}")
        if len(config.direction) != 3 or not np.linalg.norm(config.direction) > 0:
            problems.append(f"direction must be a non-zero 3-vector, got {config.direction}")
        if config.exhaustion not in ("norm", "axis"):
            problems.append(f"exhaustion must be 'norm' or 'axis', got {config.exhaustion!r}")
        unknown = [s for s in config.suites if s not in SUITES]
        if unknown:
            problems.append(f"unknown suites {unknown} (choose from {', '.join(SUITES)})")
        if not config.suites:
            problems.append("no suites requested")
        if config.surface in CATALOG_NAMES and config.surface != "graph":
            surface = catalog_surface(config.surface)
            if config.exhaustion == "axis" and not surface.tubular_axes:
                problems.append(f"{config.surface} has no tubular axis for an axis exhaustion")
            if "tubular" in config.suites and not surface.tubular_axes:
                problems.append(f"tubular suite requires a tubular surface; {config.surface} has no tubular axis")
        elif "tubular" in config.suites or config.exhaustion == "axis":
            problems.append("graph surfaces have no tubular axis")
        if config.alpha != 2.0 and {"frequency", "main_inequality"} & set(config.suites):
            problems.append("frequency and main_inequality suites use closed-form frequencies (alpha = 2)")
        if not config.slab > 0:
            problems.append(f"slab half-width must be positive, got {config.slab}")
        if int(config.probe_tracts) < 1:
            problems.append(f"probe_tracts must be >= 1, got {config.probe_tracts}")
        if not config.volume_radius > 100.0:
            problems.append(f"volume_radius must exceed 100 (two decades above 1), got {config.volume_radius}")
        if not config.multiplicity_radii or min(config.multiplicity_radii) <= 1.0:
            problems.append(f"multiplicity radii must exceed 1, got {config.multiplicity_radii}")
        if int(config.n_theta) < 8:
            problems.append(f"n_theta must be >= 8, got {config.n_theta}")
        if config.threads is not None and int(config.threads) < 1:
            problems.append(f"threads must be >= 1, got {config.threads}")
        return problems

    @classmethod
    def validate(cls, config: RunConfig) -> RunConfig:
        """
        Raises:
            ConfigError: with the list of problems
        """
        problems = cls.problems(config)
        if problems:
            raise ConfigError("Invalid run configuration: " + "; ".join(problems), problems)
        return config


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    status: str = "ok"
    checks: List[BoundCheck] = field(default_factory=list)
    quantities: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    error: Optional[str] = None
    runtime: float = 0.0
    tables: Dict[str, List[Dict]] = field(default_factory=dict, repr=False)
    documents: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def success(self) -> bool:
        return self.status == "ok"

    @property
    def satisfied(self) -> bool:
        return self.success and all(c.satisfied for c in self.checks)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status,
            "success": self.success,
            "satisfied": self.satisfied,
            "error": self.error,
            "checks": [c.to_dict() for c in self.checks],
            "quantities": _jsonable(self.quantities),
            "notes": list(self.notes),
        }


@dataclass
class Report:
    config: RunConfig
    suites: Dict[str, SuiteResult]
    schema_version: str = SCHEMA_VERSION

    @property
    def satisfied(self) -> bool:
        return all(s.satisfied for s in self.suites.values())

    @property
    def exit_code(self) -> int:
        return 0 if self.satisfied else 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "config": self.config.to_dict(),
            "satisfied": self.satisfied,
            "suites": {name: self.suites[name].to_dict() for name in sorted(self.suites)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for name in sorted(self.suites):
            suite = self.suites[name]
            if not suite.checks:
                rows.append({"suite": name, "status": suite.status, "check": "", "lhs": "", "relation": "",
                             "rhs": "", "satisfied": suite.satisfied, "runtime": round(suite.runtime, 3)})
            for check in suite.checks:
                rows.append({"suite": name, "status": suite.status, "check": check.name, "lhs": check.lhs,
                             "relation": check.relation, "rhs": check.rhs, "satisfied": check.satisfied,
                             "runtime": round(suite.runtime, 3)})
        return rows


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isfinite(value):
            return value
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


def load_report(path: Path) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _numeric_leaves(data: Any, prefix: str = "") -> Dict[str, float]:
    leaves = {}
    if isinstance(data, dict):
        for key in sorted(data):
            leaves.update(_numeric_leaves(data[key], f"{prefix}.{key}" if prefix else str(key)))
    elif isinstance(data, list):
        for i, item in enumerate(data):
            leaves.update(_numeric_leaves(item, f"{prefix}[{i}]"))
    elif isinstance(data, (int, float)) and not isinstance(data, bool):
        leaves[prefix] = float(data)
    return leaves


def compare_reports(r1: Dict[str, Any], r2: Dict[str, Any], tolerance: float = 0.0) -> Dict[str, Dict[str, float]]:
    """
    Relative differences of every numeric quantity and bound side shared by two reports.

    Only entries whose relative difference exceeds ``tolerance`` are returned,
    so identical reports give an empty diff.

    Raises:
        ComparisonError: different surfaces or suite sets
    """
    s1, s2 = r1.get("config", {}).get("surface"), r2.get("config", {}).get("surface")
    if s1 != s2:
        raise ComparisonError(f"Mismatched suites/surfaces: {s1!r} vs {s2!r}")
    if sorted(r1.get("suites", {})) != sorted(r2.get("suites", {})):
        raise ComparisonError(f"Mismatched suites/surfaces: {sorted(r1.get('suites', {}))} "
                              f"vs {sorted(r2.get('suites', {}))}")
    diff = {}
    for name in sorted(r1["suites"]):
        a, b = r1["suites"][name], r2["suites"][name]
        left = _numeric_leaves({"quantities": a.get("quantities", {}),
                                "checks": {c["name"]: {"lhs": c["lhs"], "rhs": c["rhs"]} for c in a.get("checks", [])}})
        right = _numeric_leaves({"quantities": b.get("quantities", {}),
                                 "checks": {c["name"]: {"lhs": c["lhs"], "rhs": c["rhs"]} for c in b.get("checks", [])}})
        for key in sorted(set(left) & set(right)):
            rel = relative_difference(left[key], right[key])
            if rel > tolerance:
                diff[f"{name}.{key}"] = {"first": left[key], "second": right[key], "relative": rel}
    return diff


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def write_csv(path: Path, rows: List[Dict[str, Any]]):
    path.parent.mkdir(parents=True, exist_ok=True)
    columns: List[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})


def write_json(path: Path, data: Any):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True)
        f.write("\n")


def write_obj(path: Path, grid: SampleGrid):
    """Triangulated chart as a Wavefront OBJ mesh."""
    path.parent.mkdir(parents=True, exist_ok=True)
    U, V = grid.nodes()
    X = grid.surface.point(U, V).reshape(-1, 3)
    cu, cv = grid.cell_shape
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {grid.surface.name} {grid.nu}x{grid.nv}\n")
        for x in X:
            f.write(f"v {x[0]:.9g} {x[1]:.9g} {x[2]:.9g}\n")
        for i in range(cu):
            for j in range(cv):
                a = i * grid.nv + j + 1
                b = ((i + 1) % grid.nu) * grid.nv + j + 1
                c = ((i + 1) % grid.nu) * grid.nv + (j + 1) % grid.nv + 1
                d = i * grid.nv + (j + 1) % grid.nv + 1
                f.write(f"f {a} {b} {c}\nf {a} {c} {d}\n")


def write_report(report: Report, output_dir: Path, grid: Optional[SampleGrid] = None) -> Dict[str, Path]:
    """
    Write report.json, summary.csv, per-suite tables and documents and the config copy.

    Returns:
        Mapping of artifact name to path
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    with open(output_dir / "report.json", "w", encoding="utf-8") as f:
        f.write(report.to_json())
        f.write("\n")
    written["report"] = output_dir / "report.json"
    write_csv(output_dir / "summary.csv", report.summary_rows())
    written["summary"] = output_dir / "summary.csv"
    for suite in report.suites.values():
        for table, rows in suite.tables.items():
            if rows:
                path = output_dir / f"{table}.csv"
                write_csv(path, rows)
                written[table] = path
        for name, document in suite.documents.items():
            path = output_dir / f"{name}.json"
            write_json(path, document)
            written[name] = path
    ConfigManager.save_config(output_dir / "config.json", report.config)
    written["config"] = output_dir / "config.json"
    if report.config.export_obj and grid is not None:
        write_obj(output_dir / "surface.obj", grid)
        written["obj"] = output_dir / "surface.obj"
    return written


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

class SuiteRunner:
    """
    Evaluate the requested suites of a RunConfig.

    Suites run concurrently on a thread pool; a failing suite is recorded
    with its error and does not abort the others.
    """

    def __init__(self, config: RunConfig, threads: Optional[int] = None):
        self.config = ConfigValidator.validate(config)
        self.threads = threads or ConfigManager.thread_cap(config)
        self.surface = self._surface(config.box, config.radius)
        self.grid = SampleGrid(self.surface, *map(int, config.grid))
        self.t_grid = make_t_grid(**config.t_grid)
        self.e = np.asarray(config.direction, dtype=float)
        self._volume: Optional[ProjectiveVolumeEstimate] = None
        self._volume_lock = threading.Lock()
        self._handlers: Dict[str, Callable[[SuiteResult], None]] = {
            "frequency": self._frequency,
            "energy": self._energy,
            "tracts": self._tracts,
            "main_inequality": self._main_inequality,
            "tubular": self._tubular,
            "projective_volume": self._projective_volume,
            "humps": self._humps,
            "index": self._index,
            "bernstein": self._bernstein,
            "distortion": self._distortion,
        }

    # -- helpers ------------------------------------------------------------

    def _surface(self, box: Optional[List[float]], radius: Optional[float]) -> SurfaceChart:
        name = self.config.surface
        if box is not None:
            template = DEFAULT_BOXES[name]
            chart_box = ParameterBox(*map(float, box), periodic_u=template.periodic_u,
                                     periodic_v=template.periodic_v)
        elif radius is not None:
            chart_box = box_for_radius(name, float(radius))
        else:
            chart_box = None
        return catalog_surface(name, chart_box, profile=self.config.profile)

    def exhaustion(self, surface: Optional[SurfaceChart] = None):
        surface = surface or self.surface
        if self.config.exhaustion == "axis":
            return abs_coordinate_field(surface, surface.tubular_axes[0])
        return norm_field(surface)

    def volume_estimate(self) -> ProjectiveVolumeEstimate:
        """Projective volume on the volume box, computed once per run."""
        with self._volume_lock:
            if self._volume is None:
                R = float(self.config.volume_radius)
                surface = self._surface(None, R)
                grid = SampleGrid(surface, *map(int, self.config.volume_grid))
                self._volume = projective_volume(surface, make_t_grid(R / 100.0, R, 41, "log"), grid)
            return self._volume

    def _pairs(self) -> List:
        return [(float(a), float(b)) for a, b in combinations(self.t_grid, 2)]

    # -- suites -------------------------------------------------------------

    def _frequency(self, result: SuiteResult):
        h = self.exhaustion()
        rows, n_mean_rows, polyline_rows = [], [], []
        worst = 0.0
        violations = 0
        for t in self.t_grid:
            levelset = extract_level_set(h, float(t), self.grid)
            if levelset.is_empty:
                result.notes.append(f"empty level t={t:.4g}")
                continue
            polyline_rows.extend(levelset.to_rows("gradient"))
            level_rows = frequency_rows(levelset, "gradient", 256, True, self.threads)
            rows.extend(level_rows)
            for row in level_rows:
                worst = max(worst, relative_difference(row["lambda_closed"], row["lambda_oracle"]))
            means = [n_mean_lower_bound(levelset, "gradient", N) for N in range(1, 7)]
            violations += int(np.count_nonzero(np.diff(means) < -1e-12))
            n_mean_rows.append({"t": float(t), "lambda_h": fundamental_frequency(levelset).lam,
                                **{f"n_mean_{N}": m for N, m in enumerate(means, start=1)}})
        result.tables["frequency"] = rows
        result.tables["n_means"] = n_mean_rows
        result.tables["level_sets"] = polyline_rows
        result.quantities["max_oracle_gap"] = worst
        result.checks.append(BoundCheck("oracle_agreement", worst, 0.0, "<=", abs_tol=0.01))
        result.checks.append(BoundCheck("n_mean_monotone_violations", violations, 0, "<="))

    def _energy(self, result: SuiteResult):
        f = coordinate_field(self.surface, self.e)
        h = self.exhaustion()
        tubular = self.config.exhaustion == "axis"
        quadrature = SurfaceQuadrature(self.grid)
        profile = energy_profile(f, h, self.t_grid, self.grid, self.config.alpha,
                                 singular=tubular, quadrature=quadrature)
        result.tables["energy_profile"] = profile.rows()
        result.notes.extend(profile.notes)
        result.quantities["S_h"] = profile.S_h
        result.checks.append(BoundCheck("J_monotone", float(np.max(-np.diff(profile.J), initial=0.0)), 0.0,
                                        "<=", abs_tol=1e-9 * float(np.max(profile.J))))
        t1, t2 = float(self.t_grid[0]), float(self.t_grid[-1])
        result.checks.append(growth_energy_check(f, h, t1, t2, self.config.alpha, self.grid, quadrature=quadrature))
        if tubular:
            # omega >= S(f)^2 / S(h) summed over the cycles of each level
            S_f = np.zeros(self.t_grid.size)
            S_h = np.zeros(self.t_grid.size)
            for record in profile.flows_per_cycle:
                i = int(np.argmin(np.abs(self.t_grid - record.t)))
                S_f[i] += record.S_f
                S_h[i] += record.S_h
            gap = float(np.max(S_f ** 2 / S_h - profile.omega))
            result.checks.append(BoundCheck("omega_flow_bound", gap, 0.0, "<=",
                                            abs_tol=1e-9 * max(float(np.max(profile.omega)), 1.0)))
        try:
            S = full_flow(h, self.t_grid, self.grid, self.config.alpha, normalized=True)
            closed = capacity_closed_form(S, t1, t2, self.config.alpha)
            variational = capacity_variational(h, t1, t2, self.config.alpha, quadrature)
            result.quantities["capacity_closed_form"] = closed
            result.quantities["capacity_variational"] = variational
            result.checks.append(BoundCheck("capacity_agreement", relative_difference(closed, variational), 0.0,
                                            "<=", abs_tol=0.02))
        except FlowError as e:
            result.notes.append(f"capacity comparison skipped: {e}")

    def _tracts(self, result: SuiteResult):
        f = coordinate_field(self.surface, self.e)
        h = self.exhaustion()
        forest = build_tract_forest(f, self.config.tau_grid, self.grid, self.threads, confirm_enlargement=True)
        for tract in range(forest.n_tracts):
            classify_tract(forest, tract, h, self.t_grid, self.grid)
        result.documents["forest"] = forest.to_dict()
        result.notes.extend(forest.notes)
        result.quantities["n_tracts"] = forest.n_tracts
        result.quantities["regularity"] = {str(k): v for k, v in forest.regularity.items()}
        result.checks.append(BoundCheck("nesting", 0.0 if forest_is_nested(forest) else 1.0, 0.0, "<="))
        result.checks.append(BoundCheck("maximum_principle", 0.0 if forest_maximum_principle(forest) else 1.0,
                                        0.0, "<="))
        if forest.enlargement_consistent is not None:
            result.quantities["enlargement_consistent"] = forest.enlargement_consistent
        t1, t2 = float(self.t_grid[0]), float(self.t_grid[-1])
        quadrature = SurfaceQuadrature(self.grid)
        for tract in range(forest.n_tracts):
            comps, k = forest.element(tract, 0)
            check = dirichlet_capacity_check(f, h, comps, k, t1, t2, self.config.alpha, self.grid, quadrature)
            check.name = f"dirichlet_capacity[{tract}]"
            result.checks.append(check)
        schedule = [(float(t), float(1.5 * t)) for t in self.t_grid if 1.5 * t < self._reach()]
        if len(schedule) >= 2:
            bound = denjoy_ahlfors_bound(f, h, self.config.alpha, int(self.config.probe_tracts),
                                         schedule, t1, self.grid, quadrature=quadrature)
            result.quantities["denjoy_ahlfors"] = bound.to_dict()
            result.notes.append(bound.message)
            regular = sum(1 for v in forest.regularity.values() if v == "regular")
            if bound.implied_max_tracts is not None:
                result.checks.append(BoundCheck("regular_tracts_bound", regular, bound.implied_max_tracts, "<="))
        result.notes.append("regularity is sampled on the t grid; tracts are certified against "
                            "truncation-boundary contact only")

    def _reach(self) -> float:
        """Largest |x| level fully inside the chart box."""
        U, V = self.grid.nodes()
        r = np.linalg.norm(self.surface.point(U, V), axis=-1)
        edges = []
        if not self.grid.box.periodic_u:
            edges.extend([r[0, :], r[-1, :]])
        if not self.grid.box.periodic_v:
            edges.extend([r[:, 0], r[:, -1]])
        return float(min(np.min(e) for e in edges)) if edges else float("inf")

    def _main_inequality(self, result: SuiteResult):
        f = coordinate_field(self.surface, self.e)
        h = self.exhaustion()
        forest = build_tract_forest(f, self.config.tau_grid, self.grid, self.threads)
        pairs = self._pairs()
        quadrature = SurfaceQuadrature(self.grid)
        for tract in range(forest.n_tracts):
            regularity = classify_tract(forest, tract, h, self.t_grid, self.grid)
            result.quantities[f"tract_{tract}"] = regularity
            result.checks.extend(main_inequality_checks(forest, tract, f, h, self.config.alpha, pairs,
                                                        self.grid, quadrature=quadrature))
        result.checks.extend(tract_count_checks(forest, f, h, self.config.alpha, pairs, self.grid,
                                                quadrature=quadrature))
        result.quantities["n_tracts"] = forest.n_tracts
        result.quantities["pairs"] = len(pairs)

    def _tubular(self, result: SuiteResult):
        axis = self.surface.tubular_axes[0]
        f = coordinate_field(self.surface, self.e)
        h = abs_coordinate_field(self.surface, axis)
        growth = tubular_growth_check(self.surface, f, h, self.t_grid, self.grid)
        result.tables["tubular"] = growth.rows()
        result.quantities.update(growth.to_dict())
        result.quantities.pop("checks", None)
        result.checks.extend(growth.checks)
        if not growth.condition_holds:
            result.notes.append(f"Q/J = {growth.Q_over_J:.4g}: growth theorem not applicable")

    def _projective_volume(self, result: SuiteResult):
        estimate = self.volume_estimate()
        result.tables["projective_volume"] = estimate.rows()
        result.quantities.update(estimate.to_dict())
        result.checks.append(BoundCheck("V_monotone", float(np.max(-np.diff(estimate.V_of_t), initial=0.0)),
                                        0.0, "<=", abs_tol=1e-9))
        if not estimate.diverged:
            result.checks.append(BoundCheck("estimator_agreement",
                                            relative_difference(estimate.V2_log, estimate.V2_area), 0.0, "<=",
                                            abs_tol=0.05))
        else:
            result.notes.append("V(t)/ln t does not flatten: projective volume infinite")

    def _humps(self, result: SuiteResult):
        a = float(self.config.slab)
        counts = {}
        for slab in (a, 1.5 * a, 2.0 * a):
            counts[slab] = hump_count(self.grid, self.e, slab)
        values = [counts[s] for s in sorted(counts)]
        result.quantities["hump_counts"] = {f"{s:g}": c for s, c in sorted(counts.items())}
        result.checks.append(BoundCheck("humps_monotone", int(np.count_nonzero(np.diff(values) > 0)), 0, "<="))
        estimate = self.volume_estimate()
        result.quantities["V2"] = estimate.V2
        if not estimate.diverged:
            result.checks.append(BoundCheck("hump_bound", counts[a], 2.0 * estimate.V2, "<=", abs_tol=0.05))

    def _index(self, result: SuiteResult):
        estimate = self.volume_estimate()
        if estimate.diverged:
            result.notes.append("projective volume infinite: index bound trivially holds")
        index = index_theorem_check(self.surface, self.e, self.grid, V2=estimate.V2)
        result.documents["critical_points"] = [r.to_dict() for r in index.records]
        result.quantities.update({k: v for k, v in index.to_dict().items() if k != "check"})
        result.checks.append(index.check)
        refined = find_critical_points(self.surface, self.e, self.grid.refined(2))
        result.checks.append(BoundCheck("critical_points_stable", abs(len(refined) - len(index.records)), 0, "<="))
        result.checks.append(BoundCheck("index_positive_and_even",
                                        sum(1 for r in index.records if not r.valid), 0, "<="))

    def _bernstein(self, result: SuiteResult):
        radii = [float(R) for R in self.config.multiplicity_radii]
        surface = self._surface(None, 1.5 * max(radii))
        grid = SampleGrid(surface, *map(int, self.config.volume_grid))
        multiplicity = projection_multiplicity_integral(surface, self.config.projection_normal, radii,
                                                        int(self.config.n_theta), grid)
        result.tables["multiplicity"] = multiplicity.rows()
        estimate = self.volume_estimate()
        bounds = bernstein_bounds(surface, multiplicity.values[-1], None if estimate.diverged else estimate.V2)
        result.quantities.update(multiplicity.to_dict())
        result.quantities.update({k: v for k, v in bounds.to_dict().items() if k != "checks"})
        result.checks.extend(bounds.checks)
        result.notes.append(bounds.message)

    def _distortion(self, result: SuiteResult):
        alpha = self.config.alpha
        result.quantities["bound"] = distortion_bound(alpha)
        result.quantities["derivative_gap"] = derivative_check(self.surface, 1000, int(self.config.seed))
        result.quantities["critical_fraction"] = exhaustion_check(self.surface, self.grid)
        result.checks.append(BoundCheck("derivative_agreement", result.quantities["derivative_gap"], 1e-6, "<="))
        try:
            K = gauss_map_distortion(self.surface, self.grid)
        except GeometryError as e:
            result.notes.append(str(e))
            return
        result.quantities["K"] = K
        if self.surface.minimal and alpha == 2.0:
            result.checks.append(BoundCheck("distortion", K, distortion_bound(alpha), "<=", rel_tol=1e-6))
            residual = alpha_minimality_residual(self.surface, self.e, alpha, self.grid)
            result.quantities["minimality_residual"] = residual
            result.checks.append(BoundCheck("minimality_residual", residual, 1e-6, "<="))
        else:
            result.notes.append("distortion reported only; surface is not alpha-minimal for this alpha")

    # -- driver -------------------------------------------------------------

    def run_one(self, name: str) -> SuiteResult:
        """Run a single suite, capturing its errors."""
        result = SuiteResult(name)
        start = time.perf_counter()
        try:
            self._handlers[name](result)
        except TractLabError as e:
            result.status = "error"
            result.error = str(e)
            logger.error(f"Suite {name} failed: {e}")
        except Exception as e:
            result.status = "error"
            result.error = f"{type(e).__name__}: {e}"
            logger.exception(f"Unexpected error in suite {name}")
        result.runtime = time.perf_counter() - start
        logger.info(f"Suite {name}: {result.status}, "
                    f"{sum(c.satisfied for c in result.checks)}/{len(result.checks)} checks satisfied "
                    f"in {result.runtime:.2f}s")
        return result

    def run_suite(self, progress: bool = False, stop_check: Optional[Callable[[], bool]] = None) -> Report:
        """
        Run every requested suite and assemble the report.

        Args:
            progress: Show a tqdm bar over suites
            stop_check: Optional callback; pending suites are skipped once it returns True
        """
        names = list(dict.fromkeys(self.config.suites))
        results: Dict[str, SuiteResult] = {}
        logger.info(f"Running {len(names)} suites on {self.surface.name} with {self.threads} threads")
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            futures = {}
            for name in names:
                if stop_check and stop_check():
                    logger.info("Suite execution stopped by user request")
                    break
                futures[pool.submit(self.run_one, name)] = name
            bar = tqdm(total=len(futures), desc="Suites", unit="suite", disable=not progress)
            satisfied = 0
            for future in as_completed(futures):
                result = future.result()
                results[result.name] = result
                satisfied += int(result.satisfied)
                bar.set_postfix(suite=result.name, satisfied=satisfied)
                bar.update(1)
            bar.close()
        return Report(self.config, results)


def run_suite(config: RunConfig, threads: Optional[int] = None, progress: bool = False) -> Report:
    return SuiteRunner(config, threads).run_suite(progress=progress)
