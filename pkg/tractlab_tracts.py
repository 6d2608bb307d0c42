#!/usr/bin/env python3
"""
TractLab Tracts - Asymptotic Tract Structure
Nested superlevel components across a threshold grid, regular/singular
classification, hump counts and the tract-level inequality checks
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from tractlab_base import (BoundCheck, CriticalValueError, FrequencyError, LevelSetError,
                           NotRegularDirectionError)
from tractlab_energy import (SurfaceQuadrature, c_alpha, capacity_variational, component_weights,
                             dirichlet_integral, max_modulus)
from tractlab_geometry import ParameterBox, SampleGrid, ScalarField, coordinate_field
from tractlab_levelset import (SuperlevelComponents, extract_level_set, is_nested, maximum_on_ring,
                              near_critical_point, restrict_level_set, superlevel_components)
from tractlab_spectra import FrequencySpec, fundamental_frequency, n_mean_lower_bound

logger = logging.getLogger(__name__)

REGULARITY_WINDOWS = 8


@dataclass
class TractNode:
    level: int
    tau: float
    component: int
    parent: Optional[int]
    touches_boundary: bool
    cells: int
    representative: Tuple[float, float]
    maximum: float

    def to_dict(self) -> Dict:
        return {
            "level": self.level, "tau": self.tau, "component": self.component,
            "parent": self.parent, "touches_boundary": self.touches_boundary,
            "cells": self.cells, "representative": list(self.representative),
            "maximum": self.maximum,
        }


@dataclass
class TractForest:
    """
    Superlevel components per threshold with parent links to the level below.

    ``tracts`` lists, per surviving tract, the component index at every level
    (root first). ``regularity`` and ``witnesses`` are filled by classify_tract.
    """
    field: ScalarField
    tau_grid: np.ndarray
    levels: List[SuperlevelComponents]
    nodes: List[List[TractNode]]
    tracts: List[List[int]] = field(default_factory=list)
    regularity: Dict[int, str] = field(default_factory=dict)
    witnesses: Dict[int, List[Dict]] = field(default_factory=dict)
    enlargement_consistent: Optional[bool] = None
    notes: List[str] = field(default_factory=list)

    @property
    def n_tracts(self) -> int:
        return len(self.tracts)

    def element(self, tract: int, level: int = 0) -> Tuple[SuperlevelComponents, int]:
        """Superlevel components at ``level`` and the tract's component index there."""
        return self.levels[level], self.tracts[tract][level]

    def leaves_at_top(self) -> List[int]:
        return [chain[-1] for chain in self.tracts]

    def to_dict(self) -> Dict:
        return {
            "field": self.field.name,
            "tau_grid": [float(t) for t in self.tau_grid],
            "nodes": [[n.to_dict() for n in level] for level in self.nodes],
            "tracts": self.tracts,
            "regularity": {str(k): v for k, v in self.regularity.items()},
            "witnesses": {str(k): v for k, v in self.witnesses.items()},
            "enlargement_consistent": self.enlargement_consistent,
            "notes": self.notes,
        }


def _enlarged_box(box: ParameterBox, factor: float = 2.0) -> ParameterBox:
    cu, cv = 0.5 * (box.u0 + box.u1), 0.5 * (box.v0 + box.v1)
    hu, hv = 0.5 * box.width, 0.5 * box.height
    u0, u1 = (box.u0, box.u1) if box.periodic_u else (cu - factor * hu, cu + factor * hu)
    v0, v1 = (box.v0, box.v1) if box.periodic_v else (cv - factor * hv, cv + factor * hv)
    return ParameterBox(u0, u1, v0, v1, box.periodic_u, box.periodic_v)


def _top_tract_count(f: ScalarField, tau: float, grid: SampleGrid) -> int:
    comps = superlevel_components(f, tau, grid)
    return sum(1 for t in comps.touches_boundary if t)


def build_tract_forest(f: ScalarField, tau_grid: Sequence[float], grid: SampleGrid,
                       max_workers: int = 1, confirm_enlargement: bool = False) -> TractForest:
    """
    Link superlevel components of f across an increasing threshold grid.

    Tracts are the components at the largest threshold that touch the
    truncation boundary, traced back through their parents. Branches that
    die before the top threshold are pruned.

    Raises:
        CriticalValueError: a threshold is (numerically) a critical value of f
    """
    tau_grid = np.sort(np.asarray(tau_grid, dtype=float))
    for tau in tau_grid:
        witness = near_critical_point(f, float(tau), grid)
        if witness is not None:
            raise CriticalValueError(f"Threshold {tau:.6g} is a critical value of {f.name} near {witness}", float(tau))

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        levels = list(pool.map(lambda t: superlevel_components(f, float(t), grid), tau_grid))

    nodes: List[List[TractNode]] = []
    for k, comps in enumerate(levels):
        row = []
        for c in range(comps.count):
            parent = None
            mask = comps.mask(c)
            if k > 0:
                below = levels[k - 1].labels[mask]
                below = below[below > 0]
                if below.size:
                    values, counts = np.unique(below, return_counts=True)
                    if values.size > 1:
                        logger.warning(f"Component {c} at tau={comps.tau:.6g} straddles {values.size} parents")
                    parent = int(values[np.argmax(counts)]) - 1
            row.append(TractNode(k, comps.tau, c, parent, comps.touches_boundary[c],
                                 int(np.count_nonzero(mask)), comps.representatives[c], comps.maxima[c]))
        nodes.append(row)

    forest = TractForest(f, tau_grid, levels, nodes)
    if not levels:
        return forest
    for leaf in nodes[-1]:
        chain = [leaf.component]
        node = leaf
        while node.parent is not None:
            chain.append(node.parent)
            node = nodes[node.level - 1][node.parent]
        chain.reverse()
        if len(chain) != len(levels):
            continue
        if all(nodes[k][c].touches_boundary for k, c in enumerate(chain)):
            forest.tracts.append(chain)
        else:
            forest.notes.append(f"top component {leaf.component} has a compact element; excluded")
            logger.warning(f"Top component {leaf.component} of {f.name} does not reach the truncation boundary")

    if confirm_enlargement:
        bigger = grid.with_surface(grid.surface.with_box(_enlarged_box(grid.box)))
        other = _top_tract_count(f.with_surface(bigger.surface), float(tau_grid[-1]), bigger)
        forest.enlargement_consistent = other == forest.n_tracts
        if not forest.enlargement_consistent:
            forest.notes.append(f"tract count {forest.n_tracts} changes to {other} on the enlarged box")
    forest.notes.append("non-compactness proxy: contact with the truncation boundary")
    logger.info(f"{f.name}: {forest.n_tracts} tracts over tau in [{tau_grid[0]:.4g}, {tau_grid[-1]:.4g}]")
    return forest


def forest_is_nested(forest: TractForest) -> bool:
    return all(is_nested(forest.levels[k + 1], forest.levels[k]) for k in range(len(forest.levels) - 1))


def forest_maximum_principle(forest: TractForest) -> bool:
    """Every component attains its maximum next to its boundary ring."""
    return all(maximum_on_ring(comps, c) for comps in forest.levels for c in range(comps.count))


# ---------------------------------------------------------------------------
# Regularity
# ---------------------------------------------------------------------------

def classify_tract(forest: TractForest, tract: int, h: ScalarField, t_samples: Sequence[float],
                   grid: SampleGrid) -> str:
    """
    Classify a tract by the sections D(tau0) cap Sigma_h(t).

    The samples are split into log-spaced cofinal windows: the tract is
    regular when the last window is cycle-free, singular when every sample of
    the upper half carries a cycle, undetermined otherwise.
    """
    comps, k = forest.element(tract, 0)
    t_samples = np.sort(np.asarray(t_samples, dtype=float))
    witnesses = []
    for t in t_samples:
        try:
            section = restrict_level_set(extract_level_set(h, float(t), grid), comps, k)
        except LevelSetError as e:
            logger.debug(f"Skipping t={t:.6g}: {e}")
            continue
        witnesses.append({"t": float(t), "cycles": section.n_cycles, "arcs": section.n_open})

    regularity = "undetermined"
    if witnesses:
        ts = np.array([w["t"] for w in witnesses])
        has_cycle = np.array([w["cycles"] > 0 for w in witnesses])
        nonempty = np.array([w["cycles"] + w["arcs"] > 0 for w in witnesses])
        edges = np.geomspace(ts[0], ts[-1], REGULARITY_WINDOWS + 1) if ts[0] > 0 else \
            np.linspace(ts[0], ts[-1], REGULARITY_WINDOWS + 1)
        last = (ts >= edges[-2]) & nonempty
        upper = ts >= np.median(ts)
        if np.any(last) and not np.any(has_cycle[last]):
            regularity = "regular"
        elif np.all(has_cycle[upper]):
            regularity = "singular"
    forest.regularity[tract] = regularity
    forest.witnesses[tract] = witnesses
    return regularity


# ---------------------------------------------------------------------------
# Humps
# ---------------------------------------------------------------------------

def check_regular_direction(surface_grid: SampleGrid, e, levels: Optional[Sequence[float]] = None) -> None:
    """
    Raise when a sampled section {<x, e> = s} has a compact component.

    Raises:
        NotRegularDirectionError: with the offending level as witness
    """
    f = coordinate_field(surface_grid.surface, e)
    if levels is None:
        U, V = surface_grid.nodes()
        values = f.values(U, V)
        levels = np.linspace(float(np.min(values)), float(np.max(values)), 13)[1:-1]
    for s in levels:
        try:
            section = extract_level_set(f, float(s), surface_grid)
        except LevelSetError:
            continue
        if section.n_cycles:
            raise NotRegularDirectionError(
                f"Direction {tuple(np.round(f.e, 6))} is not regular: section at {s:.6g} "
                f"has {section.n_cycles} compact components",
                {"level": float(s), "cycles": section.n_cycles})


def hump_count(grid: SampleGrid, e, a: float) -> int:
    """
    Number of components of {|<x, e>| > a} reaching the truncation boundary.

    Raises:
        NotRegularDirectionError: e is not a regular direction
    """
    if a <= 0:
        raise ValueError(f"Slab half-width must be positive, got {a}")
    check_regular_direction(grid, e, None)
    f = coordinate_field(grid.surface, e)
    g = coordinate_field(grid.surface, -np.asarray(f.e))
    count = 0
    for field_ in (f, g):
        comps = superlevel_components(field_, a, grid)
        count += sum(1 for touches in comps.touches_boundary if touches)
    return count


# ---------------------------------------------------------------------------
# Inequalities
# ---------------------------------------------------------------------------

def _section_frequency(h: ScalarField, t: float, grid: SampleGrid,
                       comps: Optional[SuperlevelComponents], k: int) -> float:
    levelset = extract_level_set(h, t, grid)
    if comps is not None:
        levelset = restrict_level_set(levelset, comps, k)
    if levelset.is_empty:
        return 0.0
    return fundamental_frequency(levelset, FrequencySpec(theta="gradient", reduced=True)).lam


def _pair_levels(pairs: Sequence[Tuple[float, float]], n_levels: int) -> np.ndarray:
    lo = min(t1 for t1, _ in pairs)
    hi = max(t2 for _, t2 in pairs)
    for t1, t2 in pairs:
        if not t2 > t1:
            raise ValueError(f"Need t1 < t2, got {t1}, {t2}")
    return np.unique(np.concatenate([np.linspace(lo, hi, n_levels), np.ravel(pairs)]))


def _integral_between(levels: np.ndarray, cumulative: np.ndarray, t1: float, t2: float) -> float:
    return float(np.interp(t2, levels, cumulative) - np.interp(t1, levels, cumulative))


def main_inequality_checks(forest: TractForest, tract: int, f: ScalarField, h: ScalarField,
                           alpha: float, pairs: Sequence[Tuple[float, float]], grid: SampleGrid,
                           n_levels: int = 24, quadrature: Optional[SurfaceQuadrature] = None) -> List[BoundCheck]:
    """
    J(D cap B_h(t1)) <= J(D cap B_h(t2)) exp(-c(alpha) int_{t1}^{t2} lambda* dt) on the tract element D,
    for every (t1, t2) pair.

    lambda* is sampled once on a common level grid; the reduced frequency
    vanishes on cyclic sections, so the integral only collects the regular
    part of each interval.
    """
    if alpha != 2.0:
        raise FrequencyError("The main inequality check uses closed-form frequencies (alpha = 2)")
    pairs = [(float(t1), float(t2)) for t1, t2 in pairs]
    levels = _pair_levels(pairs, n_levels)
    quadrature = quadrature or SurfaceQuadrature(grid)
    comps, k = forest.element(tract, 0)
    region = component_weights(quadrature, comps, k)
    lam = np.array([_section_frequency(h, float(t), grid, comps, k) for t in levels])
    cumulative = integrate.cumulative_trapezoid(lam, levels, initial=0.0)
    checks = []
    for t1, t2 in pairs:
        lhs = dirichlet_integral(f, alpha, quadrature, region, h, t1)
        J2 = dirichlet_integral(f, alpha, quadrature, region, h, t2)
        exponent = c_alpha(alpha) * _integral_between(levels, cumulative, t1, t2)
        checks.append(BoundCheck(f"main_inequality[{tract}]({t1:.4g},{t2:.4g})", lhs,
                                 J2 * np.exp(-exponent), "<=", rel_tol=0.05))
    return checks


def main_inequality_check(forest: TractForest, tract: int, f: ScalarField, h: ScalarField,
                          alpha: float, t1: float, t2: float, grid: SampleGrid,
                          n_levels: int = 24, quadrature: Optional[SurfaceQuadrature] = None) -> BoundCheck:
    """Single-pair form of main_inequality_checks."""
    return main_inequality_checks(forest, tract, f, h, alpha, [(t1, t2)], grid, n_levels, quadrature)[0]


def tract_count_checks(forest: TractForest, f: ScalarField, h: ScalarField, alpha: float,
                       pairs: Sequence[Tuple[float, float]], grid: SampleGrid, n_levels: int = 24,
                       quadrature: Optional[SurfaceQuadrature] = None) -> List[BoundCheck]:
    """
    N min_i J(D_i cap B_h(t1)) <= exp(-c int_{t1}^{t2} lambda(Sigma_h(t); N) dt) J(B_h(t2))

    with N the number of detected tracts and the N-mean replaced by its
    certified lower bound.
    """
    N = forest.n_tracts
    pairs = [(float(t1), float(t2)) for t1, t2 in pairs]
    if N == 0:
        return [BoundCheck(f"tract_count({t1:.4g},{t2:.4g})", 0.0, 0.0, "<=") for t1, t2 in pairs]
    quadrature = quadrature or SurfaceQuadrature(grid)
    levels = _pair_levels(pairs, n_levels)
    lam = np.array([n_mean_lower_bound(extract_level_set(h, float(t), grid), "gradient", N) for t in levels])
    cumulative = integrate.cumulative_trapezoid(lam, levels, initial=0.0)
    regions = []
    for tract in range(N):
        comps, k = forest.element(tract, 0)
        regions.append(component_weights(quadrature, comps, k))
    checks = []
    for t1, t2 in pairs:
        smallest = min(dirichlet_integral(f, alpha, quadrature, region, h, t1) for region in regions)
        exponent = c_alpha(alpha) * _integral_between(levels, cumulative, t1, t2)
        rhs = np.exp(-exponent) * dirichlet_integral(f, alpha, quadrature, None, h, t2)
        checks.append(BoundCheck(f"tract_count({t1:.4g},{t2:.4g})", N * smallest, rhs, "<=", rel_tol=0.05))
    return checks


def tract_count_check(forest: TractForest, f: ScalarField, h: ScalarField, alpha: float,
                      t1: float, t2: float, grid: SampleGrid, n_levels: int = 24,
                      quadrature: Optional[SurfaceQuadrature] = None) -> BoundCheck:
    return tract_count_checks(forest, f, h, alpha, [(t1, t2)], grid, n_levels, quadrature)[0]


@dataclass
class DenjoyAhlforsResult:
    N: int
    t: List[float]
    xi: List[float]
    products: List[float]
    slope: float
    decays: bool
    implied_max_tracts: Optional[int]
    message: str

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def denjoy_ahlfors_bound(f: ScalarField, h: ScalarField, alpha: float, N: int,
                         schedule: Sequence[Tuple[float, float]], t1: float, grid: SampleGrid,
                         n_levels: int = 48, quadrature: Optional[SurfaceQuadrature] = None) -> DenjoyAhlforsResult:
    """
    Evaluate M(xi) cap(t, xi)^(1/alpha) exp(-(c/alpha) int_{t1}^{t} lambda(Sigma_h(s); N) ds)
    along a schedule of (t, xi) pairs.

    The capacity is the variational value of the linear extremal and the
    N-mean its certified lower bound, so the product is an upper proxy.
    A decaying proxy certifies at most N-1 regular tracts.
    """
    schedule = sorted((float(t), float(x)) for t, x in schedule)
    if not schedule:
        raise ValueError("Empty (t, xi) schedule")
    quadrature = quadrature or SurfaceQuadrature(grid)
    t_max = max(t for t, _ in schedule)
    levels = np.geomspace(t1, t_max, n_levels) if t1 > 0 else np.linspace(t1, t_max, n_levels)
    lam = np.array([n_mean_lower_bound(extract_level_set(h, float(s), grid), "gradient", N) for s in levels])
    cumulative = integrate.cumulative_trapezoid(lam, levels, initial=0.0)

    products = []
    for t, xi in schedule:
        M = max_modulus(f, extract_level_set(h, xi, grid), 0.0)
        cap = capacity_variational(h, t, xi, alpha, quadrature)
        damping = np.exp(-(c_alpha(alpha) / alpha) * float(np.interp(t, levels, cumulative)))
        products.append(float(M * cap ** (1.0 / alpha) * damping))

    ts = np.array([t for t, _ in schedule])
    logp = np.log(np.maximum(products, 1e-300))
    upper = ts >= np.median(ts)
    slope = float(np.polyfit(np.log(ts[upper]), logp[upper], 1)[0]) if np.count_nonzero(upper) >= 2 else 0.0
    decays = bool(slope < -0.05 and products[-1] < products[0])
    if decays:
        message = f"proxy decays (slope {slope:.3f}); at most {N - 1} regular tracts"
    else:
        message = f"proxy does not decay (slope {slope:.3f}); no bound certified"
        logger.info(f"Denjoy-Ahlfors proxy for N={N} on {f.name}: {message}")
    return DenjoyAhlforsResult(N, ts.tolist(), [x for _, x in schedule], products, slope, decays,
                               N - 1 if decays else None, message)
