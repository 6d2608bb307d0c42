#!/usr/bin/env python3
"""
TractLab Invariants - Global Surface Invariants
Projective volume, projection multiplicity, critical points of coordinate
functions with their indices, and the theorem checks built on them
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, ndimage, optimize
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from tractlab_base import BoundCheck, FlowError, ProjectionError, TractLabError
from tractlab_energy import SurfaceQuadrature, c_alpha, energy_profile, full_flow, level_flow
from tractlab_geometry import SampleGrid, ScalarField, SurfaceChart, coordinate_field, norm_field, normalize_direction
from tractlab_levelset import LevelSet, extract_level_set
from tractlab_spectra import FrequencySpec, fundamental_frequency

logger = logging.getLogger(__name__)

OMEGA_2 = 2.0 * np.pi
DIVERGENCE_RATIO = 2.0
SEED_THRESHOLD = 0.2
MERGE_RADIUS = 1e-6
BRANCH_RADIUS = 1e-2
BRANCH_SAMPLES = 512
BERNSTEIN_THRESHOLD = 8.0


# ---------------------------------------------------------------------------
# Projective volume
# ---------------------------------------------------------------------------

@dataclass
class ProjectiveVolumeEstimate:
    t_grid: np.ndarray
    V_of_t: np.ndarray
    area_of_t: np.ndarray
    V2_log: float
    V2_area: float
    decade_slopes: List[float]
    diverged: bool

    @property
    def slope_fit(self) -> Tuple[float, float]:
        return self.V2_log, self.V2_area

    @property
    def V2(self) -> float:
        return float("inf") if self.diverged else self.V2_log

    @property
    def estimators_agree(self) -> bool:
        return abs(self.V2_log - self.V2_area) <= 0.05 * max(abs(self.V2_log), 1e-12)

    def rows(self) -> List[Dict]:
        return [{"t": float(t), "V": float(v), "area": float(a)}
                for t, v, a in zip(self.t_grid, self.V_of_t, self.area_of_t)]

    def to_dict(self) -> Dict:
        return {
            "V2_log": self.V2_log, "V2_area": self.V2_area, "diverged": self.diverged,
            "decade_slopes": self.decade_slopes, "estimators_agree": self.estimators_agree,
        }


def _decade_windows(t_grid: np.ndarray) -> List[np.ndarray]:
    logs = np.log10(t_grid / t_grid[0])
    n = int(np.floor(logs[-1] + 1e-9))
    windows = []
    for k in range(n):
        windows.append((logs >= k - 1e-9) & (logs <= k + 1 + 1e-9))
    return windows


def projective_volume(surface: SurfaceChart, t_grid: Sequence[float], grid: SampleGrid) -> ProjectiveVolumeEstimate:
    """
    Estimate V_2 from V(t) = int over M(t) of |x|^-2 dA, M(t) = {1 < |x| < t}.

    Two estimators are fitted over the top decade of the log-spaced t grid:
    the slope of V against ln t over omega_2 and the slope of Area(M(t))
    against t^2 over pi. The limit diverges when the slope of V against
    ln t grows by more than a factor two across decades.

    Raises:
        ProjectionError: t grid covering fewer than two decades
    """
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    if t_grid.size < 4 or t_grid[0] <= 0 or t_grid[-1] / t_grid[0] < 100.0 * (1.0 - 1e-9):
        raise ProjectionError(f"t grid must span at least two decades, got [{t_grid[0]:.4g}, {t_grid[-1]:.4g}]")
    quadrature = SurfaceQuadrature(grid.with_surface(surface))
    r = norm_field(surface)
    radius = r.values(quadrature.Uc, quadrature.Vc)
    inverse_square = 1.0 / np.maximum(radius, 1e-300) ** 2
    beyond_one = quadrature.above(r, 1.0)

    V = np.empty(t_grid.size)
    area = np.empty(t_grid.size)
    for i, t in enumerate(t_grid):
        shell = np.clip(quadrature.below(r, float(t)) + beyond_one - 1.0, 0.0, 1.0)
        V[i] = quadrature.integrate(inverse_square, shell)
        area[i] = quadrature.integrate(np.ones_like(radius), shell)

    log_t = np.log(t_grid)
    slopes = []
    for window in _decade_windows(t_grid):
        if np.count_nonzero(window) >= 2:
            slopes.append(float(np.polyfit(log_t[window], V[window], 1)[0]))
    top = _decade_windows(t_grid)[-1]
    V2_log = float(np.polyfit(log_t[top], V[top], 1)[0]) / OMEGA_2
    V2_area = float(np.polyfit(t_grid[top] ** 2, area[top], 1)[0]) / np.pi
    diverged = len(slopes) >= 2 and slopes[-1] > DIVERGENCE_RATIO * max(slopes[0], 1e-300)
    logger.info(f"Projective volume of {surface.name}: {V2_log:.4f} (log), {V2_area:.4f} (area)"
                f"{' diverged' if diverged else ''}")
    return ProjectiveVolumeEstimate(t_grid, V, area, V2_log, V2_area, slopes, bool(diverged))


# ---------------------------------------------------------------------------
# Projection multiplicity
# ---------------------------------------------------------------------------

@dataclass
class MultiplicityResult:
    R_grid: List[float]
    values: List[float]
    t_grid: np.ndarray
    theta: np.ndarray
    counts: np.ndarray = field(repr=False)
    boundary_radius: float

    def rows(self) -> List[Dict]:
        return [{"R": R, "integral": v} for R, v in zip(self.R_grid, self.values)]

    def to_dict(self) -> Dict:
        return {"R_grid": self.R_grid, "values": self.values, "boundary_radius": self.boundary_radius}


def plane_basis(plane) -> np.ndarray:
    """
    Orthonormal 2x3 basis of a 2-plane given by a normal vector or two spanning vectors.
    """
    plane = np.asarray(plane, dtype=float)
    if plane.shape == (3,):
        n = normalize_direction(plane)
        helper = np.eye(3)[int(np.argmin(np.abs(n)))]
        a = np.cross(n, helper)
        a /= np.linalg.norm(a)
        return np.vstack([a, np.cross(n, a)])
    if plane.shape == (2, 3):
        q, _ = np.linalg.qr(plane.T)
        if np.linalg.matrix_rank(plane) < 2:
            raise ProjectionError("Spanning vectors of the plane are dependent")
        return q.T
    raise ProjectionError(f"Plane must be a normal (3,) or a basis (2, 3), got shape {plane.shape}")


def _projected_nodes(grid: SampleGrid, basis: np.ndarray) -> np.ndarray:
    U, V = grid.nodes()
    return grid.surface.point(U, V) @ basis.T


def _triangles(grid: SampleGrid, P: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vertices (n, 2) of the two triangles of every cell, periodic cells included."""
    cu, cv = grid.cell_shape
    i = np.arange(cu)
    j = np.arange(cv)
    i1 = (i + 1) % grid.nu
    j1 = (j + 1) % grid.nv
    p00 = P[i][:, j].reshape(-1, 2)
    p10 = P[i1][:, j].reshape(-1, 2)
    p11 = P[i1][:, j1].reshape(-1, 2)
    p01 = P[i][:, j1].reshape(-1, 2)
    return (np.concatenate([p00, p00]), np.concatenate([p10, p11]), np.concatenate([p11, p01]))


def boundary_projection_radius(grid: SampleGrid, basis: np.ndarray) -> float:
    """min |pi_V x| over the non-periodic edges of the truncation box."""
    P = np.linalg.norm(_projected_nodes(grid, basis), axis=-1)
    edges = []
    if not grid.box.periodic_u:
        edges.extend([P[0, :], P[-1, :]])
    if not grid.box.periodic_v:
        edges.extend([P[:, 0], P[:, -1]])
    if not edges:
        return float("inf")
    return float(min(np.min(e) for e in edges))


def _polar_ranges(a: np.ndarray, b: np.ndarray, c: np.ndarray, t_grid: np.ndarray, n_theta: int):
    lo = np.minimum(np.minimum(a, b), c)
    hi = np.maximum(np.maximum(a, b), c)
    corners = np.stack([lo, np.column_stack([hi[:, 0], lo[:, 1]]), hi,
                        np.column_stack([lo[:, 0], hi[:, 1]])], axis=1)
    radii = np.linalg.norm(corners, axis=-1)
    r_max = radii.max(axis=1)
    nearest = np.clip(0.0, lo, hi)
    r_min = np.linalg.norm(nearest, axis=-1)
    t_lo = np.searchsorted(t_grid, r_min, side="left")
    t_hi = np.searchsorted(t_grid, r_max, side="right")

    d_theta = 2.0 * np.pi / n_theta
    centre = 0.5 * (lo + hi)
    phi_c = np.arctan2(centre[:, 1], centre[:, 0])
    rel = np.angle(np.exp(1j * (np.arctan2(corners[..., 1], corners[..., 0]) - phi_c[:, None])))
    k_lo = np.ceil((phi_c + rel.min(axis=1)) / d_theta).astype(int)
    k_hi = np.floor((phi_c + rel.max(axis=1)) / d_theta).astype(int)
    around = r_min == 0.0
    k_lo[around] = 0
    k_hi[around] = n_theta - 1
    n_t = np.maximum(t_hi - t_lo, 0)
    n_k = np.clip(k_hi - k_lo + 1, 0, n_theta)
    return t_lo, n_t, k_lo, n_k


def projection_counts(grid: SampleGrid, plane, t_grid: np.ndarray, n_theta: int,
                      chunk: int = 50000) -> np.ndarray:
    """
    n(t e^{i theta}) on a polar grid: preimages under pi_V o x counted over
    the triangles of the parameter grid.
    """
    basis = plane_basis(plane)
    P = _projected_nodes(grid, basis)
    A, B, C = _triangles(grid, P)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    counts = np.zeros((t_grid.size, n_theta), dtype=np.int64)
    for start in range(0, A.shape[0], chunk):
        a, b, c = A[start:start + chunk], B[start:start + chunk], C[start:start + chunk]
        d = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        t_lo, n_t, k_lo, n_k = _polar_ranges(a, b, c, t_grid, n_theta)
        pairs = n_t * n_k
        keep = (pairs > 0) & (np.abs(d) > 1e-300)
        if not np.any(keep):
            continue
        idx = np.nonzero(keep)[0]
        pairs = pairs[idx]
        tri = np.repeat(idx, pairs)
        offset = np.arange(int(pairs.sum())) - np.repeat(np.cumsum(pairs) - pairs, pairs)
        width = n_k[tri]
        ti = t_lo[tri] + offset // width
        ki = np.mod(k_lo[tri] + offset % width, n_theta)
        q = np.column_stack([t_grid[ti] * np.cos(theta[ki]), t_grid[ti] * np.sin(theta[ki])])
        pa, pb, pc = a[tri] - q, b[tri] - q, c[tri] - q
        l1 = (pb[:, 0] * pc[:, 1] - pb[:, 1] * pc[:, 0]) / d[tri]
        l2 = (pc[:, 0] * pa[:, 1] - pc[:, 1] * pa[:, 0]) / d[tri]
        l3 = 1.0 - l1 - l2
        inside = (l1 >= -1e-12) & (l2 >= -1e-12) & (l3 >= -1e-12)
        np.add.at(counts, (ti[inside], ki[inside]), 1)
    return counts


def projection_multiplicity_integral(surface: SurfaceChart, plane, R_grid: Sequence[float],
                                     n_theta: int, grid: SampleGrid, n_t: int = 96) -> MultiplicityResult:
    """
    (1/ln R) int_1^R dt/t int_0^{2 pi} n(t e^{i theta}) d theta for every R in R_grid.

    Raises:
        ProjectionError: the projected truncation boundary comes inside max(R_grid)
    """
    R_grid = sorted(float(R) for R in R_grid)
    if not R_grid or R_grid[0] <= 1.0:
        raise ProjectionError(f"Radii must exceed 1, got {R_grid}")
    grid = grid.with_surface(surface)
    basis = plane_basis(plane)
    boundary = boundary_projection_radius(grid, basis)
    if boundary <= R_grid[-1]:
        raise ProjectionError(f"{surface.name} is not proper over radius {R_grid[-1]:.4g}: "
                              f"projected boundary reaches {boundary:.4g}")
    t_grid = np.unique(np.concatenate([np.geomspace(1.0, R_grid[-1], n_t), R_grid]))
    counts = projection_counts(grid, basis, t_grid, n_theta)
    ring = counts.sum(axis=1) * (2.0 * np.pi / n_theta)
    cumulative = integrate.cumulative_trapezoid(ring, np.log(t_grid), initial=0.0)
    values = [float(np.interp(np.log(R), np.log(t_grid), cumulative) / np.log(R)) for R in R_grid]
    logger.info(f"Multiplicity integral of {surface.name}: {values[-1]:.4f} at R={R_grid[-1]:.4g}")
    return MultiplicityResult(R_grid, values, t_grid, 2.0 * np.pi * np.arange(n_theta) / n_theta,
                              counts, boundary)


# ---------------------------------------------------------------------------
# Critical points
# ---------------------------------------------------------------------------

@dataclass
class CriticalPointRecord:
    u: float
    v: float
    value: float
    sigma: int
    index: int
    radius: float
    valid: bool = True

    @property
    def location(self) -> Tuple[float, float]:
        return self.u, self.v

    def to_dict(self) -> Dict:
        return asdict(self)


class BranchCountUnstable(TractLabError):
    """Branch count changed when the sampling circle was halved"""


def _sign_changes(f: ScalarField, u: float, v: float, value: float, radius: float) -> int:
    phi = np.linspace(0.0, 2.0 * np.pi, BRANCH_SAMPLES, endpoint=False)
    samples = f.values(u + radius * np.cos(phi), v + radius * np.sin(phi)) - value
    signs = np.sign(samples)
    signs = signs[signs != 0]
    if signs.size == 0:
        return 0
    return int(np.count_nonzero(signs != np.roll(signs, 1)))


def branch_count(f: ScalarField, u: float, v: float, radius: float = BRANCH_RADIUS,
                 attempts: int = 5) -> Tuple[int, float]:
    """
    Number of branches sigma of {f = f(a)} through a, counted as sign changes
    of f - f(a) on a parameter circle; the radius is halved until two
    successive counts agree.

    Returns:
        (sigma, radius used)
    """
    value = float(f.values(np.float64(u), np.float64(v)))
    state = {"radius": radius}
    try:
        for attempt in Retrying(stop=stop_after_attempt(attempts),
                                retry=retry_if_exception_type(BranchCountUnstable), reraise=True):
            with attempt:
                r = state["radius"]
                outer = _sign_changes(f, u, v, value, r)
                inner = _sign_changes(f, u, v, value, 0.5 * r)
                if outer != inner:
                    state["radius"] = 0.5 * r
                    raise BranchCountUnstable(f"sigma {outer} at r={r:.3g} vs {inner} at r={0.5 * r:.3g}")
                return outer, r
    except (BranchCountUnstable, RetryError) as e:
        logger.warning(f"Unstable branch count at ({u:.6g}, {v:.6g}): {e}")
        return _sign_changes(f, u, v, value, state["radius"]), state["radius"]


def _seed_nodes(f: ScalarField, grid: SampleGrid, threshold: float) -> List[Tuple[float, float]]:
    U, V = grid.nodes()
    grad = f.gradient_norm(U, V)
    modes = ("wrap" if grid.box.periodic_u else "nearest", "wrap" if grid.box.periodic_v else "nearest")
    local_min = ndimage.minimum_filter(grad, size=3, mode=modes) == grad
    seeds = np.argwhere(local_min & (grad < threshold))
    return [(float(U[i, j]), float(V[i, j])) for i, j in seeds]


def _newton(f: ScalarField, u0: float, v0: float) -> Optional[Tuple[float, float]]:
    def fun(p):
        fu, fv = f.param_gradient(np.float64(p[0]), np.float64(p[1]))
        return [float(fu), float(fv)]

    def jac(p):
        fuu, fuv, fvv = f.param_hessian(np.float64(p[0]), np.float64(p[1]))
        return [[float(fuu), float(fuv)], [float(fuv), float(fvv)]]

    sol = optimize.root(fun, [u0, v0], jac=jac, method="hybr")
    if not sol.success:
        return None
    u, v = (float(x) for x in f.surface.box.wrap(sol.x[0], sol.x[1]))
    if not bool(f.surface.box.contains(u, v)):
        return None
    if float(f.gradient_norm(np.float64(u), np.float64(v))) > 1e-8:
        return None
    return u, v


def find_critical_points(surface: SurfaceChart, e, grid: SampleGrid,
                         seed_threshold: float = SEED_THRESHOLD) -> List[CriticalPointRecord]:
    """
    Critical points of f = <x, e>, i.e. the points where the Gauss map hits +-e.

    Seeds are grid nodes where |e^T| is a local minimum below
    ``seed_threshold``; each seed is polished by Newton's method on
    (f_u, f_v). Seeds that diverge or leave the box are logged and skipped.
    """
    f = coordinate_field(surface, e)
    grid = grid.with_surface(surface)
    found: List[Tuple[float, float]] = []
    box = surface.box
    for u0, v0 in _seed_nodes(f, grid, seed_threshold):
        point = _newton(f, u0, v0)
        if point is None:
            logger.warning(f"Newton search from seed ({u0:.4g}, {v0:.4g}) did not converge")
            continue
        duplicate = False
        for u1, v1 in found:
            du = abs(point[0] - u1)
            dv = abs(point[1] - v1)
            if box.periodic_u:
                du = min(du, box.width - du)
            if box.periodic_v:
                dv = min(dv, box.height - dv)
            if np.hypot(du, dv) < MERGE_RADIUS * max(1.0, box.extent):
                duplicate = True
                break
        if not duplicate:
            found.append(point)

    records = []
    for u, v in sorted(found):
        sigma, radius = branch_count(f, u, v)
        index = sigma // 2 - 1
        valid = sigma % 2 == 0 and index >= 1
        if not valid:
            logger.warning(f"Critical point ({u:.6g}, {v:.6g}) has sigma={sigma}; flagged invalid")
        records.append(CriticalPointRecord(u, v, float(f.values(np.float64(u), np.float64(v))),
                                           sigma, index, radius, valid))
    logger.info(f"{surface.name}: {len(records)} critical points of {f.name}")
    return records


@dataclass
class IndexCheck:
    records: List[CriticalPointRecord]
    index_sum: int
    V2: float
    euler_char: int
    check: BoundCheck

    @property
    def satisfied(self) -> bool:
        return self.check.satisfied

    def to_dict(self) -> Dict:
        return {
            "critical_points": [r.to_dict() for r in self.records],
            "index_sum": self.index_sum, "V2": self.V2, "euler_char": self.euler_char,
            "check": self.check.to_dict(),
        }


def index_theorem_check(surface: SurfaceChart, e, grid: SampleGrid, V2: Optional[float] = None,
                        t_grid: Optional[Sequence[float]] = None, volume_grid: Optional[SampleGrid] = None,
                        slack: float = 0.05) -> IndexCheck:
    """
    sum ind(a_j) <= V_2 - chi(M) for the critical points of <x, e>.

    V_2 is estimated with projective_volume unless supplied.
    """
    if V2 is None:
        if t_grid is None or volume_grid is None:
            raise ProjectionError("Index check needs V2 or a t grid and grid to estimate it")
        V2 = projective_volume(surface, t_grid, volume_grid).V2
    records = find_critical_points(surface, e, grid)
    total = int(sum(r.index for r in records))
    check = BoundCheck("index_theorem", float(total), float(V2 - surface.euler_char), "<=", abs_tol=slack)
    if np.isposinf(V2):
        # V_2 = inf: the bound holds for any finite index sum
        check.satisfied = True
        logger.info(f"Index bound on {surface.name} holds trivially: projective volume infinite")
    return IndexCheck(records, total, float(V2), surface.euler_char, check)


# ---------------------------------------------------------------------------
# Tubular growth
# ---------------------------------------------------------------------------

@dataclass
class TubularGrowthResult:
    t_grid: np.ndarray
    J: np.ndarray
    Q: np.ndarray
    lam: np.ndarray
    S_h: float
    growth_rate: float
    bound: float
    Q_over_J: float
    condition_holds: bool
    identity_errors: List[float]
    checks: List[BoundCheck] = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)

    def rows(self) -> List[Dict]:
        return [{"t": float(t), "J": float(j), "Q": float(q), "lambda": float(l)}
                for t, j, q, l in zip(self.t_grid, self.J, self.Q, self.lam)]

    def to_dict(self) -> Dict:
        return {
            "S_h": self.S_h, "growth_rate": self.growth_rate, "bound": self.bound,
            "Q_over_J": self.Q_over_J, "condition_holds": self.condition_holds,
            "max_identity_error": max(self.identity_errors) if self.identity_errors else None,
            "checks": [c.to_dict() for c in self.checks],
        }


def _cycle_frequency_identity(levelset: LevelSet) -> Tuple[float, float]:
    """(lambda_h, 2 pi min_j 1/S(h, G_j)) on a union of cycles."""
    lam = fundamental_frequency(levelset, FrequencySpec(theta="gradient")).lam
    flows = []
    for comp in levelset.components:
        single = LevelSet(levelset.surface, levelset.level, [comp], levelset.field)
        flows.append(level_flow(single, 2.0))
    return lam, 2.0 * np.pi / max(flows)


def tubular_growth_check(surface: SurfaceChart, f: ScalarField, h: ScalarField,
                         t_grid: Sequence[float], grid: SampleGrid,
                         condition_tolerance: float = 1e-6) -> TubularGrowthResult:
    """
    Growth of J(t) for a harmonic f on a surface sliced into cycles by h.

    Reports ln J(t)/t at the top sample against 8 pi / S(h), whether
    Q(t)/J(t) vanishes, and checks per level the identity
    lambda_h = 2 pi min_j 1/S(h, G_j) >= 4 pi / S(h) together with the
    differential growth inequality dJ/dt >= 2 lambda_h (J - Q).

    Raises:
        FlowError: a sampled level is not a union of cycles
    """
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    grid = grid.with_surface(surface)
    lam = np.empty(t_grid.size)
    identity_errors = []
    for i, t in enumerate(t_grid):
        levelset = extract_level_set(h, float(t), grid)
        if levelset.is_empty or levelset.n_open:
            raise FlowError(f"Level t={t:.6g} of {h.name} is not a union of cycles")
        lam[i], via_flows = _cycle_frequency_identity(levelset)
        identity_errors.append(abs(lam[i] - via_flows) / max(via_flows, 1e-300))
    S_h = full_flow(h, t_grid, grid)
    profile = energy_profile(f, h, t_grid, grid, 2.0, singular=True, quadrature=SurfaceQuadrature(grid))
    J, Q = profile.J, profile.Q
    growth_rate = float(np.log(J[-1]) / t_grid[-1])
    bound = 8.0 * np.pi / S_h
    Q_over_J = float(Q[-1] / J[-1]) if J[-1] > 0 else float("nan")
    condition_holds = bool(abs(Q_over_J) < condition_tolerance)

    dJ = profile.dJ_dt()
    checks = [BoundCheck("frequency_flow_bound", 4.0 * np.pi / S_h, float(np.min(lam)), "<=", rel_tol=0.01)]
    interior = slice(1, -1) if t_grid.size > 2 else slice(None)
    checks.append(BoundCheck("growth_inequality", float(np.max((2.0 * lam * (J - Q) - dJ)[interior])),
                             0.0, "<=", abs_tol=0.05 * float(np.max(dJ[interior]))))
    checks.append(BoundCheck("differential_main_inequality",
                             float(np.max((J - Q - c_alpha(2.0) / lam * dJ)[interior])), 0.0, "<=",
                             abs_tol=0.05 * float(np.max(J))))
    if condition_holds:
        checks.append(BoundCheck("tubular_growth", bound, growth_rate, "<=", rel_tol=0.05))
    else:
        logger.info(f"Q/J = {Q_over_J:.4g} on {surface.name}: growth theorem not applicable")
    return TubularGrowthResult(t_grid, J, Q, lam, S_h, growth_rate, bound, Q_over_J,
                               condition_holds, identity_errors, checks)


# ---------------------------------------------------------------------------
# Bernstein-type bounds
# ---------------------------------------------------------------------------

@dataclass
class BernsteinResult:
    integral: float
    threshold: float
    topology_bound: Optional[float]
    V2: Optional[float]
    planar: bool
    checks: List[BoundCheck]
    message: str

    @property
    def satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)

    def to_dict(self) -> Dict:
        return {
            "integral": self.integral, "threshold": self.threshold,
            "topology_bound": self.topology_bound, "V2": self.V2, "planar": self.planar,
            "checks": [c.to_dict() for c in self.checks], "message": self.message,
        }


def bernstein_bounds(surface: SurfaceChart, integral: float, V2: Optional[float] = None) -> BernsteinResult:
    """
    Compare a multiplicity integral with the threshold 8, the topological
    bound 2(l + 3 - g) and, for finite V_2, the relation integral / 4 >= V_2.

    A plane is the only minimal surface below the threshold; for it the
    topological bound does not apply.
    """
    planar = integral < BERNSTEIN_THRESHOLD
    checks = []
    bound = None
    if planar:
        message = f"integral {integral:.4f} below {BERNSTEIN_THRESHOLD:g}: consistent with a plane"
        if surface.name != "plane" and surface.minimal:
            checks.append(BoundCheck("bernstein_threshold", BERNSTEIN_THRESHOLD, integral, "<="))
    else:
        message = f"integral {integral:.4f} at least {BERNSTEIN_THRESHOLD:g}: not a plane"
        checks.append(BoundCheck("bernstein_threshold", BERNSTEIN_THRESHOLD, integral, "<=", rel_tol=0.02))
        if surface.ends:
            bound = 2.0 * (surface.ends + 3 - surface.genus)
            checks.append(BoundCheck("topology_bound", bound, integral, "<=", rel_tol=0.02))
    if V2 is not None and np.isfinite(V2):
        checks.append(BoundCheck("projective_volume_relation", V2, integral / 4.0, "<=", rel_tol=0.05))
    return BernsteinResult(float(integral), BERNSTEIN_THRESHOLD, bound, V2, planar, checks, message)
