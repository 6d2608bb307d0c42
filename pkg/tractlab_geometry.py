#!/usr/bin/env python3
"""
TractLab Geometry - Surface Charts and Pointwise Differential Geometry
Parametric immersions of the classical catalog, sample grids, scalar fields
and the curvature / Gauss-map operators built on them
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import brentq

from tractlab_base import GeometryError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

# x, (x_u, x_v), (x_uu, x_uv, x_vv); every array has a trailing axis of length 3
Jet = Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ParameterBox:
    """Rectangle [u0,u1]x[v0,v1] with per-axis periodicity flags"""
    u0: float
    u1: float
    v0: float
    v1: float
    periodic_u: bool = False
    periodic_v: bool = False

    def __post_init__(self):
        if not (self.u1 > self.u0 and self.v1 > self.v0):
            raise GeometryError(f"Empty parameter box: {self}")

    @property
    def width(self) -> float:
        return self.u1 - self.u0

    @property
    def height(self) -> float:
        return self.v1 - self.v0

    @property
    def extent(self) -> float:
        return max(self.width, self.height)

    def contains(self, u, v, pad: float = 0.0) -> np.ndarray:
        u = np.asarray(u)
        v = np.asarray(v)
        inside_u = np.ones(np.shape(u), dtype=bool) if self.periodic_u else (u >= self.u0 - pad) & (u <= self.u1 + pad)
        inside_v = np.ones(np.shape(v), dtype=bool) if self.periodic_v else (v >= self.v0 - pad) & (v <= self.v1 + pad)
        return inside_u & inside_v

    def wrap(self, u, v) -> Tuple[np.ndarray, np.ndarray]:
        """Map parameters back into the fundamental domain along periodic axes."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.periodic_u:
            u = self.u0 + np.mod(u - self.u0, self.width)
        if self.periodic_v:
            v = self.v0 + np.mod(v - self.v0, self.height)
        return u, v

    def to_list(self):
        return [self.u0, self.u1, self.v0, self.v1]


class SurfaceChart:
    """
    Parametric immersion (u,v) -> R^3 on a ParameterBox.

    The jet function returns the immersion with its first and second
    parameter derivatives and is evaluated on arrays of any shape.
    Charts are immutable; ``with_box`` returns a re-truncated copy.
    """

    def __init__(self, name: str, box: ParameterBox, jet: Callable[[np.ndarray, np.ndarray], Jet],
                 euler_char: Optional[int] = None, ends: Optional[int] = None,
                 genus: Optional[int] = None, minimal: bool = False,
                 tubular_axes: Tuple[Tuple[float, float, float], ...] = ()):
        self.name = name
        self.box = box
        self._jet = jet
        self.euler_char = euler_char
        self.ends = ends
        self.genus = genus
        self.minimal = minimal
        self.tubular_axes = tuple(tubular_axes)

    def __repr__(self) -> str:
        return f"SurfaceChart(name={self.name!r}, box={self.box.to_list()})"

    def with_box(self, box: ParameterBox) -> "SurfaceChart":
        return SurfaceChart(self.name, box, self._jet, self.euler_char, self.ends,
                            self.genus, self.minimal, self.tubular_axes)

    def jet(self, u, v) -> Jet:
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return self._jet(u, v)

    def point(self, u, v) -> np.ndarray:
        return self.jet(u, v)[0]

    def derivatives(self, u, v) -> Tuple[np.ndarray, np.ndarray]:
        return self.jet(u, v)[1]

    def second_derivatives(self, u, v) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.jet(u, v)[2]

    def first_fundamental_form(self, u, v) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        xu, xv = self.derivatives(u, v)
        return _dot(xu, xu), _dot(xu, xv), _dot(xv, xv)

    def area_element(self, u, v) -> np.ndarray:
        E, F, G = self.first_fundamental_form(u, v)
        return np.sqrt(np.maximum(E * G - F * F, 0.0))

    def normal(self, u, v) -> np.ndarray:
        xu, xv = self.derivatives(u, v)
        return _unit_normal(xu, xv)

    def tubular_axis_for(self, e) -> Optional[np.ndarray]:
        """Return the declared tubular axis parallel to ``e`` if there is one."""
        e = normalize_direction(e)
        for axis in self.tubular_axes:
            a = normalize_direction(axis)
            if abs(abs(float(np.dot(a, e))) - 1.0) < 1e-9:
                return a
        return None


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


def _unit_normal(xu: np.ndarray, xv: np.ndarray) -> np.ndarray:
    n = np.cross(xu, xv)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    if np.any(norm <= 0.0):
        raise GeometryError("Degenerate metric: x_u and x_v are linearly dependent")
    return n / norm


def normalize_direction(e) -> np.ndarray:
    e = np.asarray(e, dtype=float).reshape(3)
    norm = np.linalg.norm(e)
    if norm == 0.0:
        raise GeometryError("Direction vector must be non-zero")
    return e / norm


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

def _plane_jet(u, v) -> Jet:
    zero = np.zeros_like(u)
    one = np.ones_like(u)
    x = np.stack([u, v, zero], axis=-1)
    xu = np.stack([one, zero, zero], axis=-1)
    xv = np.stack([zero, one, zero], axis=-1)
    z3 = np.zeros(u.shape + (3,))
    return x, (xu, xv), (z3, z3.copy(), z3.copy())


def _catenoid_jet(u, v) -> Jet:
    cu, su = np.cos(u), np.sin(u)
    ch, sh = np.cosh(v), np.sinh(v)
    zero = np.zeros_like(u)
    x = np.stack([ch * cu, ch * su, v], axis=-1)
    xu = np.stack([-ch * su, ch * cu, zero], axis=-1)
    xv = np.stack([sh * cu, sh * su, np.ones_like(u)], axis=-1)
    xuu = np.stack([-ch * cu, -ch * su, zero], axis=-1)
    xuv = np.stack([-sh * su, sh * cu, zero], axis=-1)
    xvv = np.stack([ch * cu, ch * su, zero], axis=-1)
    return x, (xu, xv), (xuu, xuv, xvv)


def _helicoid_jet(u, v) -> Jet:
    cu, su = np.cos(u), np.sin(u)
    ch, sh = np.cosh(v), np.sinh(v)
    zero = np.zeros_like(u)
    x = np.stack([sh * cu, sh * su, u], axis=-1)
    xu = np.stack([-sh * su, sh * cu, np.ones_like(u)], axis=-1)
    xv = np.stack([ch * cu, ch * su, zero], axis=-1)
    xuu = np.stack([-sh * cu, -sh * su, zero], axis=-1)
    xuv = np.stack([-ch * su, ch * cu, zero], axis=-1)
    xvv = np.stack([sh * cu, sh * su, zero], axis=-1)
    return x, (xu, xv), (xuu, xuv, xvv)


def _enneper_jet(u, v) -> Jet:
    zero = np.zeros_like(u)
    two = 2.0 * np.ones_like(u)
    x = np.stack([u - u ** 3 / 3.0 + u * v ** 2,
                  -(v - v ** 3 / 3.0 + v * u ** 2),
                  u ** 2 - v ** 2], axis=-1)
    xu = np.stack([1.0 - u ** 2 + v ** 2, -2.0 * u * v, 2.0 * u], axis=-1)
    xv = np.stack([2.0 * u * v, -(1.0 - v ** 2 + u ** 2), -2.0 * v], axis=-1)
    xuu = np.stack([-2.0 * u, -2.0 * v, two], axis=-1)
    xuv = np.stack([2.0 * v, -2.0 * u, zero], axis=-1)
    xvv = np.stack([2.0 * u, 2.0 * v, -two], axis=-1)
    return x, (xu, xv), (xuu, xuv, xvv)


def _graph_jet_factory(phi: Callable, step: float,
                       dphi: Optional[Callable] = None,
                       d2phi: Optional[Callable] = None) -> Callable:
    """Graph (u, v, phi(u,v)); missing derivatives come from central differences."""

    def first(u, v):
        if dphi is not None:
            return dphi(u, v)
        pu = (phi(u + step, v) - phi(u - step, v)) / (2.0 * step)
        pv = (phi(u, v + step) - phi(u, v - step)) / (2.0 * step)
        return pu, pv

    def second(u, v):
        if d2phi is not None:
            return d2phi(u, v)
        c = phi(u, v)
        puu = (phi(u + step, v) - 2.0 * c + phi(u - step, v)) / step ** 2
        pvv = (phi(u, v + step) - 2.0 * c + phi(u, v - step)) / step ** 2
        puv = (phi(u + step, v + step) - phi(u + step, v - step)
               - phi(u - step, v + step) + phi(u - step, v - step)) / (4.0 * step ** 2)
        return puu, puv, pvv

    def jet(u, v) -> Jet:
        zero = np.zeros_like(u)
        one = np.ones_like(u)
        z = np.broadcast_to(np.asarray(phi(u, v), dtype=float), u.shape)
        pu, pv = (np.broadcast_to(np.asarray(p, dtype=float), u.shape) for p in first(u, v))
        puu, puv, pvv = (np.broadcast_to(np.asarray(p, dtype=float), u.shape) for p in second(u, v))
        x = np.stack([u, v, z], axis=-1)
        xu = np.stack([one, zero, pu], axis=-1)
        xv = np.stack([zero, one, pv], axis=-1)
        return x, (xu, xv), (np.stack([zero, zero, puu], axis=-1),
                             np.stack([zero, zero, puv], axis=-1),
                             np.stack([zero, zero, pvv], axis=-1))

    return jet


GRAPH_PROFILES: Dict[str, Tuple[Callable, Callable, Callable]] = {
    "paraboloid": (lambda u, v: u ** 2 + v ** 2,
                   lambda u, v: (2.0 * u, 2.0 * v),
                   lambda u, v: (2.0 + 0.0 * u, 0.0 * u, 2.0 + 0.0 * u)),
    "saddle": (lambda u, v: u ** 2 - v ** 2,
               lambda u, v: (2.0 * u, -2.0 * v),
               lambda u, v: (2.0 + 0.0 * u, 0.0 * u, -2.0 + 0.0 * u)),
}

DEFAULT_BOXES: Dict[str, ParameterBox] = {
    "plane": ParameterBox(-1.0, 1.0, -1.0, 1.0),
    "catenoid": ParameterBox(0.0, TWO_PI, -3.0, 3.0, periodic_u=True),
    "helicoid": ParameterBox(-np.pi, np.pi, -2.0, 2.0),
    "enneper": ParameterBox(-1.5, 1.5, -1.5, 1.5),
    "graph": ParameterBox(-1.0, 1.0, -1.0, 1.0),
}

CATALOG_NAMES = ("plane", "catenoid", "helicoid", "enneper", "graph")


def catalog_surface(name: str, box: Optional[ParameterBox] = None,
                    phi: Optional[Callable] = None, profile: Optional[str] = None) -> SurfaceChart:
    """
    Instantiate a catalog surface in its standard parametrization.

    Args:
        name: One of plane, catenoid, helicoid, enneper, graph
        box: Truncation box (defaults to a small box around the origin)
        phi: Height function for ``graph`` (derivatives by central differences)
        profile: Named graph profile with analytic derivatives ("paraboloid", "saddle")

    Returns:
        SurfaceChart

    Raises:
        GeometryError: unknown name or missing graph height
    """
    if name not in CATALOG_NAMES:
        raise GeometryError(f"Unknown surface: {name!r} (choose from {', '.join(CATALOG_NAMES)})")
    if box is None:
        box = DEFAULT_BOXES[name]

    if name == "plane":
        return SurfaceChart("plane", box, _plane_jet, euler_char=1, ends=1, genus=0, minimal=True)
    if name == "catenoid":
        return SurfaceChart("catenoid", box, _catenoid_jet, euler_char=0, ends=2, genus=0,
                            minimal=True, tubular_axes=((0.0, 0.0, 1.0),))
    if name == "helicoid":
        # simply connected; one end of infinite total curvature
        return SurfaceChart("helicoid", box, _helicoid_jet, euler_char=1, ends=1, genus=0, minimal=True)
    if name == "enneper":
        return SurfaceChart("enneper", box, _enneper_jet, euler_char=1, ends=1, genus=0, minimal=True)

    if profile is not None:
        if profile not in GRAPH_PROFILES:
            raise GeometryError(f"Unknown graph profile: {profile!r}")
        f, df, d2f = GRAPH_PROFILES[profile]
        jet = _graph_jet_factory(f, 0.0, df, d2f)
        label = f"graph:{profile}"
    elif phi is not None:
        jet = _graph_jet_factory(phi, 1e-5 * box.extent)
        label = "graph"
    else:
        raise GeometryError("graph surfaces need a height function phi or a named profile")
    return SurfaceChart(label, box, jet, euler_char=1, ends=1, genus=0, minimal=False)


def box_for_radius(name: str, radius: float) -> ParameterBox:
    """Parameter box whose boundary is mapped to |x| >= radius."""
    if radius <= 1.0:
        raise GeometryError(f"Truncation radius must exceed 1, got {radius}")
    if name == "plane" or name.startswith("graph"):
        return ParameterBox(-radius, radius, -radius, radius)
    if name == "catenoid":
        v = float(np.arccosh(radius))
        return ParameterBox(0.0, TWO_PI, -v, v, periodic_u=True)
    if name == "helicoid":
        v = float(np.arcsinh(radius))
        return ParameterBox(-radius, radius, -v, v)
    if name == "enneper":
        a = brentq(lambda s: s ** 3 / 3.0 - s - radius, np.sqrt(3.0), 3.0 * radius + 3.0)
        return ParameterBox(-a, a, -a, a)
    raise GeometryError(f"Unknown surface: {name!r}")


# ---------------------------------------------------------------------------
# Sample grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleGrid:
    """
    Node lattice over a chart's box.

    ``nu`` and ``nv`` count nodes; a periodic axis drops the duplicated
    endpoint so that cells wrap around.
    """
    surface: SurfaceChart
    nu: int
    nv: int

    def __post_init__(self):
        if self.nu < 4 or self.nv < 4:
            raise GeometryError(f"Grid too coarse: {self.nu}x{self.nv}")

    @property
    def box(self) -> ParameterBox:
        return self.surface.box

    @property
    def du(self) -> float:
        b = self.box
        return b.width / self.nu if b.periodic_u else b.width / (self.nu - 1)

    @property
    def dv(self) -> float:
        b = self.box
        return b.height / self.nv if b.periodic_v else b.height / (self.nv - 1)

    @property
    def u_nodes(self) -> np.ndarray:
        return self.box.u0 + self.du * np.arange(self.nu)

    @property
    def v_nodes(self) -> np.ndarray:
        return self.box.v0 + self.dv * np.arange(self.nv)

    def nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.u_nodes, self.v_nodes, indexing="ij")

    @property
    def cell_shape(self) -> Tuple[int, int]:
        b = self.box
        return (self.nu if b.periodic_u else self.nu - 1,
                self.nv if b.periodic_v else self.nv - 1)

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        cu, cv = self.cell_shape
        uc = self.box.u0 + self.du * (np.arange(cu) + 0.5)
        vc = self.box.v0 + self.dv * (np.arange(cv) + 0.5)
        return np.meshgrid(uc, vc, indexing="ij")

    def refined(self, factor: int = 2) -> "SampleGrid":
        b = self.box
        nu = self.nu * factor if b.periodic_u else (self.nu - 1) * factor + 1
        nv = self.nv * factor if b.periodic_v else (self.nv - 1) * factor + 1
        return replace(self, nu=nu, nv=nv)

    def with_surface(self, surface: SurfaceChart) -> "SampleGrid":
        return replace(self, surface=surface)


# ---------------------------------------------------------------------------
# Curvature
# ---------------------------------------------------------------------------

@dataclass
class CurvatureData:
    metric: np.ndarray
    second_form: np.ndarray
    normal: np.ndarray
    mean_curvature: float
    principal_curvatures: Tuple[float, float]
    principal_directions: Tuple[np.ndarray, np.ndarray]


def curvature_at(surface: SurfaceChart, u: float, v: float) -> CurvatureData:
    """
    Full curvature data at one parameter point.

    Principal data come from the generalized symmetric eigenproblem
    II a = k I a, whose eigenvectors are orthonormal in the induced metric.
    The mean curvature is the trace k1 + k2.
    """
    x, (xu, xv), (xuu, xuv, xvv) = surface.jet(np.float64(u), np.float64(v))
    nu_vec = _unit_normal(xu, xv)
    metric = np.array([[xu @ xu, xu @ xv], [xu @ xv, xv @ xv]])
    if np.linalg.det(metric) <= 1e-14 * max(1.0, float(np.trace(metric)) ** 2):
        raise GeometryError(f"Degenerate metric at (u,v)=({u}, {v})")
    second = np.array([[xuu @ nu_vec, xuv @ nu_vec], [xuv @ nu_vec, xvv @ nu_vec]])
    eigvals, eigvecs = linalg.eigh(second, metric)
    # descending order: lambda_1 >= lambda_2
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    directions = tuple(xu * eigvecs[0, k] + xv * eigvecs[1, k] for k in range(2))
    return CurvatureData(
        metric=metric,
        second_form=second,
        normal=nu_vec,
        mean_curvature=float(eigvals[0] + eigvals[1]),
        principal_curvatures=(float(eigvals[0]), float(eigvals[1])),
        principal_directions=directions,
    )


def curvature_field(surface: SurfaceChart, U: np.ndarray, V: np.ndarray) -> Dict[str, np.ndarray]:
    """Vectorized metric, second form, normal and principal curvatures on arrays."""
    _, (xu, xv), (xuu, xuv, xvv) = surface.jet(U, V)
    normal = _unit_normal(xu, xv)
    E, F, G = _dot(xu, xu), _dot(xu, xv), _dot(xv, xv)
    e, f, g = _dot(xuu, normal), _dot(xuv, normal), _dot(xvv, normal)
    det_i = E * G - F * F
    if np.any(det_i <= 0.0):
        raise GeometryError("Degenerate metric on the sample grid")
    H = (e * G - 2.0 * f * F + g * E) / det_i
    K = (e * g - f * f) / det_i
    disc = np.sqrt(np.maximum(0.25 * H * H - K, 0.0))
    return {
        "E": E, "F": F, "G": G, "e": e, "f": f, "g": g,
        "normal": normal, "xu": xu, "xv": xv,
        "H": H, "K": K, "k1": 0.5 * H + disc, "k2": 0.5 * H - disc,
    }


def distortion_bound(alpha: float) -> float:
    """Distortion coefficient bound max(alpha-1, 1/(alpha-1)) for alpha-minimal surfaces."""
    if alpha <= 1.0:
        raise GeometryError(f"alpha must exceed 1, got {alpha}")
    return max(alpha - 1.0, 1.0 / (alpha - 1.0))


def gauss_map_distortion(surface: SurfaceChart, grid: SampleGrid) -> float:
    """
    Maximum ratio max(|k1|,|k2|)/min(|k1|,|k2|) over regular samples.

    Samples where both principal curvatures vanish are skipped.

    Raises:
        GeometryError: every sample is flat ("distortion undefined")
    """
    U, V = grid.nodes()
    data = curvature_field(surface, U, V)
    a1, a2 = np.abs(data["k1"]), np.abs(data["k2"])
    big = np.maximum(a1, a2)
    small = np.minimum(a1, a2)
    usable = big > 1e-12
    if not np.any(usable):
        raise GeometryError("Distortion undefined: all samples are flat")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(small[usable] > 0.0, big[usable] / small[usable], np.inf)
    K = float(np.max(ratio))
    logger.debug(f"{surface.name}: distortion K={K:.6g} over {int(usable.sum())} samples")
    return K


def alpha_minimality_residual(surface: SurfaceChart, e, alpha: float, grid: SampleGrid) -> float:
    """
    max |H + (alpha-2) k_nu(tau)| with tau = e^T/|e^T|, over samples with e^T != 0.

    Raises:
        GeometryError: alpha <= 1, or e is normal to the surface at every sample
    """
    if alpha <= 1.0:
        raise GeometryError(f"alpha must exceed 1, got {alpha}")
    e = normalize_direction(e)
    U, V = grid.nodes()
    data = curvature_field(surface, U, V)
    normal = data["normal"]
    tangent = e - _dot(normal, e)[..., None] * normal
    tnorm = np.linalg.norm(tangent, axis=-1)
    usable = tnorm > 1e-9
    if not np.any(usable):
        raise GeometryError("Residual undefined: e is normal to the surface on the whole grid")
    tau = tangent[usable] / tnorm[usable][:, None]
    E, F, G = data["E"][usable], data["F"][usable], data["G"][usable]
    det_i = E * G - F * F
    bu = _dot(tau, data["xu"][usable])
    bv = _dot(tau, data["xv"][usable])
    a1 = (G * bu - F * bv) / det_i
    a2 = (-F * bu + E * bv) / det_i
    k_tau = data["e"][usable] * a1 ** 2 + 2.0 * data["f"][usable] * a1 * a2 + data["g"][usable] * a2 ** 2
    residual = np.abs(data["H"][usable] + (alpha - 2.0) * k_tau)
    return float(np.max(residual))


def derivative_check(surface: SurfaceChart, n_points: int = 1000, seed: int = 0,
                     step: float = 1e-5) -> float:
    """Max relative gap between analytic and central-difference immersion derivatives."""
    rng = np.random.default_rng(seed)
    b = surface.box
    margin = 2.0 * step
    u = rng.uniform(b.u0 + margin, b.u1 - margin, n_points)
    v = rng.uniform(b.v0 + margin, b.v1 - margin, n_points)
    _, (xu, xv), (xuu, xuv, xvv) = surface.jet(u, v)
    fd_u = (surface.point(u + step, v) - surface.point(u - step, v)) / (2.0 * step)
    fd_v = (surface.point(u, v + step) - surface.point(u, v - step)) / (2.0 * step)
    (xu_p, xv_p), (xu_m, xv_m) = surface.derivatives(u + step, v), surface.derivatives(u - step, v)
    (_, xv_vp), (_, xv_vm) = surface.derivatives(u, v + step), surface.derivatives(u, v - step)
    fd_uu = (xu_p - xu_m) / (2.0 * step)
    fd_uv = (xv_p - xv_m) / (2.0 * step)
    fd_vv = (xv_vp - xv_vm) / (2.0 * step)
    worst = 0.0
    for exact, approx in ((xu, fd_u), (xv, fd_v), (xuu, fd_uu), (xuv, fd_uv), (xvv, fd_vv)):
        scale = np.maximum(np.linalg.norm(exact, axis=-1), 1.0)
        worst = max(worst, float(np.max(np.linalg.norm(exact - approx, axis=-1) / scale)))
    return worst


# ---------------------------------------------------------------------------
# Scalar fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarField:
    """
    Function on a surface chart.

    kind is one of "coordinate", "abs_coordinate", "norm", "custom".
    Custom fields take a callable of (u, v) and are differentiated by
    central differences in parameter space.
    """
    surface: SurfaceChart
    kind: str
    direction: Optional[Tuple[float, float, float]] = None
    func: Optional[Callable] = field(default=None, compare=False)
    label: str = ""

    @property
    def e(self) -> np.ndarray:
        if self.direction is None:
            raise GeometryError(f"{self.kind} field has no direction")
        return np.asarray(self.direction, dtype=float)

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind in ("coordinate", "abs_coordinate"):
            body = "<" + ",".join(f"{c:g}" for c in self.direction) + ">"
            return body if self.kind == "coordinate" else f"|{body}|"
        return "|x|" if self.kind == "norm" else "custom"

    def with_surface(self, surface: SurfaceChart) -> "ScalarField":
        return replace(self, surface=surface)

    def values(self, u, v) -> np.ndarray:
        if self.kind == "custom":
            u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
            return np.asarray(self.func(u, v), dtype=float)
        x = self.surface.point(u, v)
        if self.kind == "coordinate":
            return x @ self.e
        if self.kind == "abs_coordinate":
            return np.abs(x @ self.e)
        return np.linalg.norm(x, axis=-1)

    def param_gradient(self, u, v) -> Tuple[np.ndarray, np.ndarray]:
        """(f_u, f_v); |x| and |<x,e>| use their one-sided value 0 at the kink."""
        if self.kind == "custom":
            step = 1e-5 * self.surface.box.extent
            fu = (self.values(u + step, v) - self.values(u - step, v)) / (2.0 * step)
            fv = (self.values(u, v + step) - self.values(u, v - step)) / (2.0 * step)
            return fu, fv
        x, (xu, xv), _ = self.surface.jet(u, v)
        if self.kind in ("coordinate", "abs_coordinate"):
            e = self.e
            fu, fv = xu @ e, xv @ e
            if self.kind == "abs_coordinate":
                s = np.sign(x @ e)
                fu, fv = s * fu, s * fv
            return fu, fv
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0.0, r, 1.0)
        fu = np.where(r > 0.0, _dot(x, xu) / safe, 0.0)
        fv = np.where(r > 0.0, _dot(x, xv) / safe, 0.0)
        return fu, fv

    def param_hessian(self, u, v) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.kind == "coordinate":
            xuu, xuv, xvv = self.surface.second_derivatives(u, v)
            e = self.e
            return xuu @ e, xuv @ e, xvv @ e
        step = 1e-5 * self.surface.box.extent
        fu_p, fv_p = self.param_gradient(u + step, v)
        fu_m, fv_m = self.param_gradient(u - step, v)
        _, fv_vp = self.param_gradient(u, v + step)
        _, fv_vm = self.param_gradient(u, v - step)
        return (fu_p - fu_m) / (2 * step), (fv_p - fv_m) / (2 * step), (fv_vp - fv_vm) / (2 * step)

    def gradient(self, u, v) -> Tuple[np.ndarray, np.ndarray]:
        """Tangential surface gradient vector (..., 3) and its norm."""
        _, (xu, xv), _ = self.surface.jet(u, v)
        fu, fv = self.param_gradient(u, v)
        E, F, G = _dot(xu, xu), _dot(xu, xv), _dot(xv, xv)
        det_i = E * G - F * F
        if np.any(det_i <= 0.0):
            raise GeometryError("Degenerate metric while computing a gradient")
        a = (G * fu - F * fv) / det_i
        b = (-F * fu + E * fv) / det_i
        grad = a[..., None] * xu + b[..., None] * xv
        return grad, np.linalg.norm(grad, axis=-1)

    def gradient_norm(self, u, v) -> np.ndarray:
        _, (xu, xv), _ = self.surface.jet(u, v)
        fu, fv = self.param_gradient(u, v)
        E, F, G = _dot(xu, xu), _dot(xu, xv), _dot(xv, xv)
        sq = (G * fu * fu - 2.0 * F * fu * fv + E * fv * fv) / (E * G - F * F)
        return np.sqrt(np.maximum(sq, 0.0))


def coordinate_field(surface: SurfaceChart, e) -> ScalarField:
    return ScalarField(surface, "coordinate", tuple(normalize_direction(e)))


def abs_coordinate_field(surface: SurfaceChart, e) -> ScalarField:
    return ScalarField(surface, "abs_coordinate", tuple(normalize_direction(e)))


def norm_field(surface: SurfaceChart) -> ScalarField:
    return ScalarField(surface, "norm")


def custom_field(surface: SurfaceChart, func: Callable, label: str = "custom") -> ScalarField:
    return ScalarField(surface, "custom", func=func, label=label)


def surface_gradient(field: ScalarField, u: float, v: float) -> Tuple[np.ndarray, float]:
    """
    Tangential gradient of a field at one point.

    Returns:
        (gradient vector in R^3, its norm)
    """
    grad, norm = field.gradient(np.float64(u), np.float64(v))
    return np.asarray(grad), float(norm)


def exhaustion_check(surface: SurfaceChart, grid: SampleGrid, threshold: float = 1e-6) -> float:
    """Fraction of grid nodes where |grad |x|| < threshold."""
    U, V = grid.nodes()
    grad = norm_field(surface).gradient_norm(U, V)
    return float(np.count_nonzero(grad < threshold)) / grad.size
