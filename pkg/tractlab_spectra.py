#!/usr/bin/env python3
"""
TractLab Spectra - Fundamental Frequencies of Level Sets
Closed-form frequencies of arcs and cycles, N-means, the admissible mean
shift, a Yau-type lower bound and a finite-element Rayleigh-quotient oracle
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import brentq

from tractlab_base import FrequencyError
from tractlab_levelset import LevelSet, Polyline, Weight, segment_lengths, vertex_weights, weight_samples

logger = logging.getLogger(__name__)

MIN_THETA = 1e-12


@dataclass
class FrequencySpec:
    alpha: float = 2.0
    theta: Weight = "gradient"
    reduced: bool = False

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise FrequencyError(f"alpha must exceed 1, got {self.alpha}")


@dataclass
class FrequencyResult:
    lam: float
    per_component: List[Tuple[int, float]] = field(default_factory=list)
    method: str = "wirtinger_closed_form"
    integrals: List[float] = field(default_factory=list)
    kinds: List[str] = field(default_factory=list)


def _theta(levelset: LevelSet, comp: Polyline, theta: Weight) -> np.ndarray:
    samples = weight_samples(levelset, comp, theta)
    if np.any(samples < MIN_THETA):
        raise FrequencyError(f"Weight theta vanishes on component {comp.component_id} "
                             f"(min {float(np.min(samples)):.3e})")
    return samples


def theta_integrals(levelset: LevelSet, theta: Weight) -> np.ndarray:
    """Per-component integral of theta ds with positivity check."""
    if levelset.is_empty:
        raise FrequencyError("Undefined frequency: empty level set")
    out = np.empty(len(levelset))
    for k, comp in enumerate(levelset.components):
        ds = segment_lengths(levelset.surface, comp)
        out[k] = float(np.dot(vertex_weights(ds), _theta(levelset, comp, theta)))
    return out


def fundamental_frequency(levelset: LevelSet, spec: Optional[FrequencySpec] = None) -> FrequencyResult:
    """
    Closed-form fundamental 2-frequency of a simple set.

    Open components contribute pi/int(theta), cycles 2*pi/int(theta); the set
    value is the minimum over components. With ``spec.reduced`` any cycle
    forces the value to 0.

    Raises:
        FrequencyError: alpha != 2, empty level set or vanishing weight
    """
    spec = spec or FrequencySpec()
    if spec.alpha != 2.0:
        raise FrequencyError("Closed-form frequencies exist for alpha = 2 only")
    integrals = theta_integrals(levelset, spec.theta)
    per_component = []
    kinds = []
    for comp, integral in zip(levelset.components, integrals):
        scale = 2.0 * np.pi if comp.closed else np.pi
        per_component.append((comp.component_id, float(scale / integral)))
        kinds.append(comp.kind)
    lam = min(value for _, value in per_component)
    if spec.reduced and levelset.n_cycles > 0:
        lam = 0.0
    return FrequencyResult(float(lam), per_component, "wirtinger_closed_form",
                           [float(i) for i in integrals], kinds)


def reduced_frequency(levelset: LevelSet, theta: Weight = "gradient") -> float:
    return fundamental_frequency(levelset, FrequencySpec(theta=theta, reduced=True)).lam


def n_mean_lower_bound(levelset: LevelSet, theta: Weight, N: int) -> float:
    """
    Certified lower bound for the N-mean of the reduced 2-frequency.

    With c cycles and total weight Theta the bound is pi (N-c)^2 / (N Theta);
    it is pi N / Theta without cycles and 0 once c >= N.
    """
    if N < 1:
        raise FrequencyError(f"N must be a positive integer, got {N}")
    if levelset.is_empty:
        return 0.0
    cycles = levelset.n_cycles
    if cycles >= N:
        return 0.0
    total = float(np.sum(theta_integrals(levelset, theta)))
    return float(np.pi * (N - cycles) ** 2 / (N * total))


def n_mean_exact(levelset: LevelSet, theta: Weight, N: int) -> float:
    """
    Exact N-mean for a one-component set.

    The optimal split is uniform in theta-measure: pi N / Theta for an arc;
    a cycle gives 0 for N = 1 and pi N / Theta once it must be cut.
    """
    if len(levelset) != 1:
        raise FrequencyError("Exact N-means are available for one-component sets only")
    if N < 1:
        raise FrequencyError(f"N must be a positive integer, got {N}")
    total = float(theta_integrals(levelset, theta)[0])
    if levelset.components[0].closed and N == 1:
        return 0.0
    return float(np.pi * N / total)


# ---------------------------------------------------------------------------
# Rayleigh-quotient oracle
# ---------------------------------------------------------------------------

def _arc_length_samples(levelset: LevelSet, comp: Polyline, theta: Weight) -> Tuple[np.ndarray, np.ndarray]:
    ds = segment_lengths(levelset.surface, comp)
    s = np.concatenate([[0.0], np.cumsum(ds)])
    return s, _theta(levelset, comp, theta)


def _assemble(h: np.ndarray, theta_mid: np.ndarray, n_nodes: int, periodic: bool):
    """P1 stiffness (weight 1/theta) and mass (weight theta) matrices."""
    K = np.zeros((n_nodes, n_nodes))
    M = np.zeros((n_nodes, n_nodes))
    for e in range(h.size):
        i = e
        j = (e + 1) % n_nodes if periodic else e + 1
        k_e = 1.0 / (theta_mid[e] * h[e])
        m_e = theta_mid[e] * h[e] / 6.0
        K[i, i] += k_e
        K[j, j] += k_e
        K[i, j] -= k_e
        K[j, i] -= k_e
        M[i, i] += 2.0 * m_e
        M[j, j] += 2.0 * m_e
        M[i, j] += m_e
        M[j, i] += m_e
    return K, M


def rayleigh_oracle(levelset: LevelSet, theta: Weight = "gradient", alpha: float = 2.0,
                    n: int = 256, component: int = 0) -> float:
    """
    Discrete minimum of int phi'^2/theta / int phi^2 theta on one component.

    The component is resampled to ``n`` vertices uniform in arc length.
    Open arcs carry Dirichlet conditions; cycles are periodic and the
    zero weighted-mean constraint selects the second eigenvalue.

    Returns:
        Square root of the smallest admissible generalized eigenvalue
    """
    if alpha != 2.0:
        raise FrequencyError("The Rayleigh oracle is implemented for alpha = 2")
    if n < 32:
        raise FrequencyError(f"Oracle mesh needs at least 32 vertices, got {n}")
    comp = levelset.components[component]
    s, th = _arc_length_samples(levelset, comp, theta)
    length = s[-1]
    if length <= 0.0:
        raise FrequencyError("Degenerate component of zero length")

    if comp.closed:
        nodes = np.linspace(0.0, length, n + 1)
        h = np.diff(nodes)
        mid = 0.5 * (nodes[:-1] + nodes[1:])
        K, M = _assemble(h, np.interp(mid, s, th), n, periodic=True)
        index = 1
    else:
        nodes = np.linspace(0.0, length, n)
        h = np.diff(nodes)
        mid = 0.5 * (nodes[:-1] + nodes[1:])
        K, M = _assemble(h, np.interp(mid, s, th), n, periodic=False)
        K, M = K[1:-1, 1:-1], M[1:-1, 1:-1]
        index = 0

    try:
        mu = linalg.eigh(K, M, eigvals_only=True, subset_by_index=[index, index])[0]
    except (linalg.LinAlgError, ValueError) as e:
        raise FrequencyError(f"Eigen-solver did not converge: {e}") from e
    return float(np.sqrt(max(mu, 0.0)))


# ---------------------------------------------------------------------------
# Admissible shift and Yau bound
# ---------------------------------------------------------------------------

def weighted_shift(phi: np.ndarray, theta: np.ndarray, weights: np.ndarray, alpha: float) -> float:
    """
    Root xi of sum w theta |xi - phi|^(alpha-2) (xi - phi) = 0.

    For alpha = 2 this is the theta-weighted mean.
    """
    phi = np.asarray(phi, dtype=float)
    mass = np.asarray(weights, dtype=float) * np.asarray(theta, dtype=float)
    if alpha == 2.0:
        return float(np.dot(mass, phi) / np.sum(mass))
    lo, hi = float(np.min(phi)), float(np.max(phi))
    if hi - lo <= 0.0:
        return lo

    def residual(xi: float) -> float:
        d = xi - phi
        return float(np.dot(mass, np.sign(d) * np.abs(d) ** (alpha - 1.0)))

    xi = brentq(residual, lo, hi, xtol=1e-14 * max(1.0, hi - lo), rtol=4 * np.finfo(float).eps, maxiter=500)
    bound = 1e-10 * float(np.sum(mass)) * float(np.max(np.abs(phi))) ** (alpha - 1.0)
    if abs(residual(xi)) > bound:
        logger.debug(f"Admissible shift residual {residual(xi):.3e} above {bound:.3e}")
    return float(xi)


def admissible_shift(levelset: LevelSet, component: int, phi, theta: Weight, alpha: float) -> float:
    """
    Admissible mean shift of ``phi`` on a cyclic component.

    Args:
        levelset: Level set holding the component
        component: Component index (must be a cycle)
        phi: Per-vertex samples or a callable of (u, v)
        theta: Weight specification
        alpha: Exponent > 1
    """
    comp = levelset.components[component]
    if not comp.closed:
        raise FrequencyError("The admissible shift is defined on cyclic components")
    # the repeated closing vertex is dropped; the periodic trapezoid folds its weight onto the first
    ds = segment_lengths(levelset.surface, comp)
    w = vertex_weights(ds)
    w[0] += w[-1]
    values = phi(comp.u, comp.v) if callable(phi) else np.asarray(phi, dtype=float)
    th = _theta(levelset, comp, theta)
    return weighted_shift(np.asarray(values)[:-1], th[:-1], w[:-1], alpha)


def yau_lower_bound(levelset: LevelSet, component: int, theta: Weight, alpha: float, f) -> float:
    """
    inf over vertices of -(f theta)^(1-alpha) d/ds(|f'|^(alpha-2) f' / theta).

    The divergence uses conservative differences on the polyline; open arcs
    are evaluated at interior vertices only.

    Raises:
        FrequencyError: f <= 0 somewhere on the component
    """
    comp = levelset.components[component]
    values = np.asarray(f(comp.u, comp.v) if callable(f) else f, dtype=float)
    if np.any(values <= 0.0):
        raise FrequencyError("Yau bound needs a positive test function")
    th = _theta(levelset, comp, theta)
    ds = segment_lengths(levelset.surface, comp)
    if comp.closed:
        values, th = values[:-1], th[:-1]
        nxt = np.roll(values, -1)
        d_next = ds
        d_prev = np.roll(ds, 1)
        theta_next = 0.5 * (th + np.roll(th, -1))
        slope = (nxt - values) / d_next
        flux = np.sign(slope) * np.abs(slope) ** (alpha - 1.0) / theta_next
        div = (flux - np.roll(flux, 1)) / (0.5 * (d_prev + d_next))
        vals, ths = values, th
    else:
        slope = np.diff(values) / ds
        theta_mid = 0.5 * (th[:-1] + th[1:])
        flux = np.sign(slope) * np.abs(slope) ** (alpha - 1.0) / theta_mid
        div = np.diff(flux) / (0.5 * (ds[:-1] + ds[1:]))
        vals, ths = values[1:-1], th[1:-1]
    bound = -div / (vals * ths) ** (alpha - 1.0)
    return float(np.min(bound))


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

def frequency_rows(levelset: LevelSet, theta: Weight = "gradient", n: int = 256,
                   with_oracle: bool = True, max_workers: int = 1) -> List[Dict]:
    """Rows (t, component, kind, int theta, lambda closed form, lambda oracle)."""
    if levelset.is_empty:
        return []
    closed_form = fundamental_frequency(levelset, FrequencySpec(theta=theta))
    oracle: List[Optional[float]] = [None] * len(levelset)
    if with_oracle:
        with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
            oracle = list(pool.map(lambda k: rayleigh_oracle(levelset, theta, 2.0, n, k), range(len(levelset))))
    rows = []
    for k, comp in enumerate(levelset.components):
        rows.append({
            "t": levelset.level,
            "component": comp.component_id,
            "kind": comp.kind,
            "theta_integral": closed_form.integrals[k],
            "lambda_closed": closed_form.per_component[k][1],
            "lambda_oracle": oracle[k],
        })
    return rows
