#!/usr/bin/env python3
"""
TractLab Energy - Dirichlet Integrals, Flows and Capacities
Cell quadrature on charts, full flows of harmonic exhaustions, capacities,
max-modulus profiles and the singular-tract terms q_j, omega and Q
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate, ndimage

from tractlab_base import BoundCheck, CapacityError, FlowError, LevelSetError
from tractlab_geometry import SampleGrid, ScalarField
from tractlab_levelset import (LevelSet, SuperlevelComponents, component_integral,
                              extract_level_set, restrict_level_set)
from tractlab_spectra import admissible_shift

logger = logging.getLogger(__name__)

FLOW_TOLERANCE = 0.01


def c_alpha(alpha: float) -> float:
    """(alpha-1)/alpha for alpha >= 2, 1/alpha on (1, 2)."""
    if alpha <= 1.0:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    return (alpha - 1.0) / alpha if alpha >= 2.0 else 1.0 / alpha


class SurfaceQuadrature:
    """
    Midpoint quadrature on the cells of a sample grid.

    Sublevel sets {h < t} are weighted by the covered fraction of each cell,
    estimated from the linear spread of h across the cell.
    """

    def __init__(self, grid: SampleGrid):
        self.grid = grid
        self.Uc, self.Vc = grid.cell_centers()
        self.dA = grid.surface.area_element(self.Uc, self.Vc) * grid.du * grid.dv
        self._cache: Dict[int, Dict[str, np.ndarray]] = {}

    def _field_data(self, field: ScalarField) -> Dict[str, np.ndarray]:
        key = id(field)
        if key not in self._cache:
            values = field.values(self.Uc, self.Vc)
            fu, fv = field.param_gradient(self.Uc, self.Vc)
            spread = np.abs(fu) * self.grid.du + np.abs(fv) * self.grid.dv
            self._cache[key] = {
                "values": values,
                "spread": np.maximum(spread, 1e-300),
                "grad": field.gradient_norm(self.Uc, self.Vc),
                "field": field,
            }
        return self._cache[key]

    def below(self, field: ScalarField, t: float) -> np.ndarray:
        """Covered fraction of each cell by {field < t}."""
        data = self._field_data(field)
        return np.clip(0.5 + (t - data["values"]) / data["spread"], 0.0, 1.0)

    def above(self, field: ScalarField, t: float) -> np.ndarray:
        return 1.0 - self.below(field, t)

    def gradient_norm(self, field: ScalarField) -> np.ndarray:
        return self._field_data(field)["grad"]

    def integrate(self, integrand: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
        w = self.dA if weights is None else self.dA * weights
        return float(np.sum(integrand * w))


def component_weights(quadrature: SurfaceQuadrature, components: SuperlevelComponents, k: int) -> np.ndarray:
    """Cell weights of superlevel component k (fraction above tau inside the grown label)."""
    grown = ndimage.binary_dilation(components.mask(k), structure=np.ones((3, 3), dtype=bool))
    return quadrature.above(components.field, components.tau) * grown


def dirichlet_integral(f: ScalarField, alpha: float, quadrature: SurfaceQuadrature,
                       region: Optional[np.ndarray] = None, h: Optional[ScalarField] = None,
                       t: Optional[float] = None) -> float:
    """
    J_alpha(f, D) = int_D |grad f|^alpha dA by cell midpoint quadrature.

    Args:
        f: Field whose energy is integrated
        alpha: Exponent > 1
        quadrature: Cell quadrature of the grid
        region: Optional cell weights of D (defaults to the whole chart)
        h, t: Optional exhaustion restricting D to the h-ball B_h(t)
    """
    weights = np.ones_like(quadrature.dA) if region is None else np.asarray(region, dtype=float)
    if h is not None and t is not None:
        weights = weights * quadrature.below(h, t)
    return quadrature.integrate(quadrature.gradient_norm(f) ** alpha, weights)


def coarea_derivative(f: ScalarField, levelset: LevelSet, alpha: float) -> float:
    """int over the level set of |grad f|^alpha / |grad h| ds."""
    if levelset.field is None:
        raise LevelSetError("Coarea derivative needs the exhaustion of the level set")
    total = 0.0
    for comp in levelset.components:
        gh = levelset.field.gradient_norm(comp.u, comp.v)
        gf = f.gradient_norm(comp.u, comp.v)
        total += component_integral(levelset, comp, gf ** alpha / np.maximum(gh, 1e-300))
    return total


# ---------------------------------------------------------------------------
# Flows and capacities
# ---------------------------------------------------------------------------

def level_flow(levelset: LevelSet, alpha: float = 2.0) -> float:
    """Raw flow int |grad h|^(alpha-1) ds over a level set of h."""
    total = 0.0
    for comp in levelset.components:
        total += component_integral(levelset, comp, levelset.field.gradient_norm(comp.u, comp.v) ** (alpha - 1.0))
    return total


def full_flow(h: ScalarField, t_samples: Sequence[float], grid: SampleGrid, alpha: float = 2.0,
              normalized: bool = False, tolerance: float = FLOW_TOLERANCE) -> float:
    """
    Full flow S(h) of a harmonic exhaustion.

    The flow int |grad h|^(alpha-1) ds is evaluated on every sampled level and
    averaged; ``normalized`` returns its (alpha-1)-th root.

    Raises:
        FlowError: a level deviates from the mean by more than ``tolerance``
    """
    flows = []
    for t in t_samples:
        levelset = extract_level_set(h, float(t), grid)
        if levelset.is_empty:
            raise FlowError(f"Empty level {t:.6g} of {h.name}", [])
        flows.append(level_flow(levelset, alpha))
    flows = np.asarray(flows)
    mean = float(np.mean(flows))
    deviation = float(np.max(np.abs(flows - mean))) / abs(mean) if mean else np.inf
    if deviation > tolerance:
        raise FlowError(f"Flow of {h.name} not constant across levels (deviation {deviation:.2%})",
                        flows.tolist())
    logger.debug(f"Full flow of {h.name}: {mean:.6g} (deviation {deviation:.2e})")
    return mean ** (1.0 / (alpha - 1.0)) if normalized else mean


def capacity_closed_form(S_h: float, t1: float, t2: float, alpha: float) -> float:
    """(S_h / (t2 - t1))^(alpha - 1) for the capacitor between two h-spheres."""
    if not t2 > t1:
        raise CapacityError(f"Capacitor needs t1 < t2, got t1={t1}, t2={t2}")
    return float((S_h / (t2 - t1)) ** (alpha - 1.0))


def capacity_variational(h: ScalarField, t1: float, t2: float, alpha: float,
                         quadrature: SurfaceQuadrature, region: Optional[np.ndarray] = None) -> float:
    """
    int |grad phi|^alpha with phi = (t2 - h)/(t2 - t1) clipped to [0, 1].

    An upper value of the capacity; exact for an alpha-harmonic h.
    """
    if not t2 > t1:
        raise CapacityError(f"Capacitor needs t1 < t2, got t1={t1}, t2={t2}")
    shell = quadrature.below(h, t2) - quadrature.below(h, t1)
    if region is not None:
        shell = shell * region
    integrand = (quadrature.gradient_norm(h) / (t2 - t1)) ** alpha
    return quadrature.integrate(integrand, shell)


def max_modulus(f: ScalarField, levelset: LevelSet, floor: float = 0.0) -> float:
    """Max of f over the refined vertices of a level set, floored at ``floor``."""
    if levelset.is_empty:
        raise LevelSetError("Max modulus on an empty level set", levelset.level)
    u, v = levelset.vertices()
    return float(max(floor, float(np.max(f.values(u, v)))))


# ---------------------------------------------------------------------------
# Singular terms
# ---------------------------------------------------------------------------

@dataclass
class CycleFlows:
    t: float
    cycle: int
    S_h: float
    S_f: float
    q: float


@dataclass
class SingularTerms:
    t_grid: np.ndarray
    omega: np.ndarray
    Q: np.ndarray
    Q_direct: np.ndarray
    S_f_total: np.ndarray
    S_h_total: np.ndarray
    cycles: List[CycleFlows] = field(default_factory=list)
    anchor: str = ""


def _cycle_flows(f: ScalarField, levelset: LevelSet, k: int):
    comp = levelset.components[k]
    h = levelset.field
    gh_vec, gh = h.gradient(comp.u, comp.v)
    gf_vec, _ = f.gradient(comp.u, comp.v)
    outward = gh_vec / np.maximum(gh, 1e-300)[:, None]
    S_h = component_integral(levelset, comp, gh)
    S_f = component_integral(levelset, comp, np.sum(gf_vec * outward, axis=-1))
    q = admissible_shift(levelset, k, f.values(comp.u, comp.v), "gradient", 2.0)
    return S_h, S_f, q


def singular_terms(f: ScalarField, h: ScalarField, t_grid: Sequence[float], grid: SampleGrid) -> SingularTerms:
    """
    Per-level cycle flows, omega(t) = sum S(f,G)^2/S(h,G) and Q(t).

    Q is the cumulative trapezoid of omega anchored at the first sampled level
    with Q(t0) = omega(t0) t0, i.e. omega is taken constant on (0, t0).
    Q_direct is sum q_j S(f, G_j) evaluated level by level.

    Raises:
        FlowError: a sampled level contains open arcs
    """
    t_grid = np.asarray(t_grid, dtype=float)
    omega = np.zeros(t_grid.size)
    q_direct = np.zeros(t_grid.size)
    sf_total = np.zeros(t_grid.size)
    sh_total = np.zeros(t_grid.size)
    records: List[CycleFlows] = []
    previous_q: Optional[List[float]] = None
    for i, t in enumerate(t_grid):
        levelset = extract_level_set(h, float(t), grid)
        if levelset.n_open:
            raise FlowError(f"Level t={t:.6g} of {h.name} has {levelset.n_open} open arcs (not tubular)")
        qs = []
        for k in range(len(levelset)):
            S_h, S_f, q = _cycle_flows(f, levelset, k)
            records.append(CycleFlows(float(t), k, S_h, S_f, q))
            omega[i] += S_f ** 2 / S_h
            q_direct[i] += q * S_f
            sf_total[i] += S_f
            sh_total[i] += S_h
            qs.append(q)
        if previous_q is not None and len(previous_q) != len(qs):
            logger.warning(f"Cycle count changed at t={t:.6g}; q_j may jump")
        previous_q = qs

    Q = omega[0] * t_grid[0] + integrate.cumulative_trapezoid(omega, t_grid, initial=0.0)
    return SingularTerms(t_grid, omega, Q, q_direct, sf_total, sh_total, records,
                         anchor=f"Q(t0)=omega(t0)*t0 at t0={t_grid[0]:.6g}, Q(0)=0 assumed")


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

@dataclass
class EnergyProfile:
    alpha: float
    c_alpha: float
    t_grid: np.ndarray
    J: np.ndarray
    M: np.ndarray
    Q: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    S_h: Optional[float] = None
    flows: Optional[np.ndarray] = None
    flows_per_cycle: List[CycleFlows] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def rows(self) -> List[Dict]:
        out = []
        for i, t in enumerate(self.t_grid):
            out.append({
                "t": float(t),
                "J": float(self.J[i]),
                "M": float(self.M[i]),
                "Q": None if self.Q is None else float(self.Q[i]),
                "omega": None if self.omega is None else float(self.omega[i]),
                "S_h": self.S_h,
            })
        return out

    def dJ_dt(self) -> np.ndarray:
        return np.gradient(self.J, self.t_grid)


def energy_profile(f: ScalarField, h: ScalarField, t_grid: Sequence[float], grid: SampleGrid,
                   alpha: float = 2.0, components: Optional[SuperlevelComponents] = None,
                   k: int = 0, singular: bool = False,
                   quadrature: Optional[SurfaceQuadrature] = None) -> EnergyProfile:
    """
    Sample J(t), M(t), the level flows of h and, in the tubular case, Q and omega.

    With ``components`` the profile is restricted to superlevel component k.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    quadrature = quadrature or SurfaceQuadrature(grid)
    region = component_weights(quadrature, components, k) if components is not None else None
    floor = components.tau if components is not None else 0.0
    J = np.empty(t_grid.size)
    M = np.empty(t_grid.size)
    flows = np.empty(t_grid.size)
    for i, t in enumerate(t_grid):
        J[i] = dirichlet_integral(f, alpha, quadrature, region, h, float(t))
        levelset = extract_level_set(h, float(t), grid)
        flows[i] = level_flow(levelset, alpha) if not levelset.is_empty else 0.0
        if components is not None:
            levelset = restrict_level_set(levelset, components, k)
        M[i] = max_modulus(f, levelset, floor) if not levelset.is_empty else floor

    profile = EnergyProfile(alpha, c_alpha(alpha), t_grid, J, M, flows=flows)
    mean = float(np.mean(flows))
    if mean > 0 and float(np.max(np.abs(flows - mean))) <= FLOW_TOLERANCE * mean:
        profile.S_h = mean
    else:
        profile.notes.append("flow of h varies across levels; S(h) not reported")
    if singular:
        terms = singular_terms(f, h, t_grid, grid)
        profile.Q = terms.Q
        profile.omega = terms.omega
        profile.flows_per_cycle = terms.cycles
        profile.notes.append(terms.anchor)
    return profile


# ---------------------------------------------------------------------------
# Energy and capacity bounds
# ---------------------------------------------------------------------------

def dirichlet_capacity_check(f: ScalarField, h: ScalarField, components: SuperlevelComponents, k: int,
                             t1: float, t2: float, alpha: float, grid: SampleGrid,
                             quadrature: Optional[SurfaceQuadrature] = None) -> BoundCheck:
    """
    int_{D cap B_h(t1)} |grad f|^alpha <= alpha^alpha cap M(t2)^alpha on a tract element D.

    The capacity is replaced by the variational value of the linear
    extremal, which can only enlarge the right-hand side.
    """
    quadrature = quadrature or SurfaceQuadrature(grid)
    region = component_weights(quadrature, components, k)
    lhs = dirichlet_integral(f, alpha, quadrature, region, h, t1)
    cap = capacity_variational(h, t1, t2, alpha, quadrature, region)
    section = restrict_level_set(extract_level_set(h, t2, grid), components, k)
    M2 = max_modulus(f, section, components.tau) if not section.is_empty else components.tau
    return BoundCheck("dirichlet_capacity", lhs, alpha ** alpha * cap * M2 ** alpha, "<=", rel_tol=0.05)


def growth_energy_check(f: ScalarField, h: ScalarField, t1: float, t2: float, alpha: float,
                        grid: SampleGrid, n_levels: int = 33,
                        quadrature: Optional[SurfaceQuadrature] = None) -> BoundCheck:
    """
    J(B_h(t1)) <= alpha^alpha [int_{t1}^{t2} M^(-alpha/(alpha-1)) / S dt]^(1-alpha)

    with M(t) = max |f| on the h-sphere and S the normalized level flow.
    """
    quadrature = quadrature or SurfaceQuadrature(grid)
    lhs = dirichlet_integral(f, alpha, quadrature, None, h, t1)
    levels = np.linspace(t1, t2, n_levels)
    integrand = np.empty(n_levels)
    abs_f = _AbsField(f)
    for i, t in enumerate(levels):
        levelset = extract_level_set(h, float(t), grid)
        S = level_flow(levelset, alpha) ** (1.0 / (alpha - 1.0))
        M = max_modulus(abs_f, levelset)
        integrand[i] = M ** (-alpha / (alpha - 1.0)) / S
    rhs = alpha ** alpha * integrate.trapezoid(integrand, levels) ** (1.0 - alpha)
    return BoundCheck("dirichlet_growth", lhs, rhs, "<=", rel_tol=0.05)


class _AbsField:
    """|f| view used for max-modulus evaluation."""

    def __init__(self, f: ScalarField):
        self.f = f

    def values(self, u, v):
        return np.abs(self.f.values(u, v))
