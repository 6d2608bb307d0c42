#!/usr/bin/env python3
"""
TractLab Level Sets - Level Curves and Superlevel Components
Marching-squares extraction with seam stitching and on-curve refinement,
weighted line integrals, and periodic flood-fill labeling of superlevel sets
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from skimage import measure

from tractlab_base import LevelSetError
from tractlab_geometry import SampleGrid, ScalarField, SurfaceChart

logger = logging.getLogger(__name__)

LEVEL_TOLERANCE = 1e-8
NEWTON_STEPS = 12

Weight = Union[None, float, str, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass
class Polyline:
    """
    Ordered (u, v) vertices of one level-set component.

    Closed polylines repeat their first vertex at the end; along a periodic
    axis the coordinates are unwrapped, so the repeat agrees with the first
    vertex up to one period.
    """
    u: np.ndarray
    v: np.ndarray
    closed: bool
    touches_boundary: bool = False
    component_id: int = 0

    def __len__(self) -> int:
        return int(self.u.size)

    @property
    def kind(self) -> str:
        return "cyclic" if self.closed else "open"


@dataclass
class LevelSet:
    surface: SurfaceChart
    level: float
    components: List[Polyline]
    field: Optional[ScalarField] = None

    def __len__(self) -> int:
        return len(self.components)

    @property
    def is_empty(self) -> bool:
        return not self.components

    @property
    def n_cycles(self) -> int:
        return sum(1 for c in self.components if c.closed)

    @property
    def n_open(self) -> int:
        return sum(1 for c in self.components if not c.closed)

    def cycles(self) -> List[Polyline]:
        return [c for c in self.components if c.closed]

    def arcs(self) -> List[Polyline]:
        return [c for c in self.components if not c.closed]

    def vertices(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.is_empty:
            return np.empty(0), np.empty(0)
        return (np.concatenate([c.u for c in self.components]),
                np.concatenate([c.v for c in self.components]))

    def to_rows(self, theta: Weight = None) -> List[Dict]:
        """Flat rows (t, component, u, v, x, y, z, theta) for CSV export."""
        rows = []
        for comp in self.components:
            x = self.surface.point(comp.u, comp.v)
            w = weight_samples(self, comp, theta)
            for k in range(len(comp)):
                rows.append({
                    "t": self.level, "component": comp.component_id,
                    "kind": comp.kind, "u": float(comp.u[k]), "v": float(comp.v[k]),
                    "x": float(x[k, 0]), "y": float(x[k, 1]), "z": float(x[k, 2]),
                    "theta": float(w[k]),
                })
        return rows


def make_polyline_levelset(surface: SurfaceChart, u, v, closed: bool, level: float = 0.0) -> LevelSet:
    """Wrap explicit parameter vertices as a one-component level set."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if closed and (u[0] != u[-1] or v[0] != v[-1]):
        u = np.append(u, u[0])
        v = np.append(v, v[0])
    return LevelSet(surface, level, [Polyline(u, v, closed)])


# ---------------------------------------------------------------------------
# Quadrature along polylines
# ---------------------------------------------------------------------------

def segment_lengths(surface: SurfaceChart, comp: Polyline) -> np.ndarray:
    x = surface.point(comp.u, comp.v)
    return np.linalg.norm(np.diff(x, axis=0), axis=-1)


def vertex_weights(ds: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights per vertex from segment lengths."""
    w = np.zeros(ds.size + 1)
    w[:-1] += 0.5 * ds
    w[1:] += 0.5 * ds
    return w


def weight_samples(levelset: LevelSet, comp: Polyline, theta: Weight) -> np.ndarray:
    if theta is None:
        return np.ones(len(comp))
    if isinstance(theta, (int, float)):
        return np.full(len(comp), float(theta))
    if isinstance(theta, str):
        if theta != "gradient" or levelset.field is None:
            raise LevelSetError(f"Unsupported weight {theta!r}")
        return levelset.field.gradient_norm(comp.u, comp.v)
    return np.broadcast_to(np.asarray(theta(comp.u, comp.v), dtype=float), comp.u.shape).copy()


def component_integral(levelset: LevelSet, comp: Polyline, values: np.ndarray) -> float:
    """Trapezoid integral of per-vertex ``values`` along one component."""
    ds = segment_lengths(levelset.surface, comp)
    return float(np.dot(vertex_weights(ds), values))


def weighted_length(levelset: LevelSet, theta: Weight = None) -> np.ndarray:
    """
    Per-component line integrals of theta with respect to arc length.

    Args:
        levelset: Non-empty level set
        theta: None (unit weight), a constant, "gradient" for |grad h| of the
            level set's own field, or a callable of (u, v)

    Returns:
        Array with one integral per component; their sum is the total
    """
    if levelset.is_empty:
        raise LevelSetError("Weighted length of an empty level set", levelset.level)
    out = np.empty(len(levelset.components))
    for k, comp in enumerate(levelset.components):
        out[k] = component_integral(levelset, comp, weight_samples(levelset, comp, theta))
    return out


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

def _padded_values(grid: SampleGrid, values: np.ndarray) -> np.ndarray:
    """Append the wrapped first row/column along periodic axes."""
    if grid.box.periodic_u:
        values = np.concatenate([values, values[:1, :]], axis=0)
    if grid.box.periodic_v:
        values = np.concatenate([values, values[:, :1]], axis=1)
    return values


def _seam_key(point: np.ndarray, shape: Tuple[int, int], periodic: Tuple[bool, bool]):
    """(axis, side) when an index-space point sits on a periodic seam, else None."""
    for axis in (0, 1):
        if not periodic[axis]:
            continue
        if abs(point[axis]) < 1e-9:
            return axis, 0
        if abs(point[axis] - (shape[axis] - 1)) < 1e-9:
            return axis, 1
    return None


def _stitch(pieces: List[np.ndarray], shape: Tuple[int, int],
            periodic: Tuple[bool, bool]) -> List[Tuple[np.ndarray, bool]]:
    """
    Join contour pieces that leave through one seam and re-enter through the other.

    Returns (index-space vertices, closed) pairs with unwrapped coordinates.
    """
    chains: List[Tuple[np.ndarray, bool]] = []
    open_pieces: List[np.ndarray] = []
    for p in pieces:
        if len(p) > 2 and np.allclose(p[0], p[-1], atol=1e-12):
            chains.append((p, True))
        else:
            open_pieces.append(p)

    # seam key and raw index-space point per (piece, end); end 0 is the first vertex
    end_info = {}
    for i, p in enumerate(open_pieces):
        for end, pt in ((0, p[0]), (1, p[-1])):
            key = _seam_key(pt, shape, periodic)
            if key is not None:
                end_info[(i, end)] = (key, pt)

    def find_partner(at):
        if at not in end_info:
            return None
        (axis, side), pt = end_info[at]
        other = 1 - axis
        for cand, ((a2, s2), q) in end_info.items():
            if cand != at and a2 == axis and s2 == 1 - side and abs(q[other] - pt[other]) < 1e-7:
                return cand, axis, q
        return None

    def shifted(piece: np.ndarray, axis: int, target: np.ndarray, anchor: np.ndarray) -> np.ndarray:
        offset = np.zeros(2)
        offset[axis] = target[axis] - anchor[axis]
        return piece + offset

    used = [False] * len(open_pieces)
    for start in range(len(open_pieces)):
        if used[start]:
            continue
        used[start] = True
        chain = open_pieces[start].copy()
        head, tail = (start, 0), (start, 1)
        closed = False
        while True:
            match = find_partner(tail)
            if match is None:
                break
            (j, e), axis, q = match
            if (j, e) == head:
                closed = True
                break
            if used[j]:
                break
            used[j] = True
            piece = open_pieces[j] if e == 0 else open_pieces[j][::-1]
            chain = np.vstack([chain, shifted(piece, axis, chain[-1], q)[1:]])
            tail = (j, 1 - e)
        while not closed:
            match = find_partner(head)
            if match is None or used[match[0][0]]:
                break
            (j, e), axis, q = match
            used[j] = True
            piece = open_pieces[j] if e == 1 else open_pieces[j][::-1]
            chain = np.vstack([shifted(piece, axis, chain[0], q)[:-1], chain])
            head = (j, 1 - e)
        chains.append((chain, closed))
    return chains


def _refine(field: ScalarField, grid: SampleGrid, level: float,
            u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Newton-project vertices onto the level along the parameter gradient.

    Vertices on a non-periodic box edge move along that edge only; steps
    longer than one cell are rejected.
    """
    box = grid.box
    u = u.copy()
    v = v.copy()
    tol_u = 1e-12 * box.extent
    on_u_edge = (~np.full(u.shape, box.periodic_u)) & ((np.abs(u - box.u0) < tol_u) | (np.abs(u - box.u1) < tol_u))
    on_v_edge = (~np.full(v.shape, box.periodic_v)) & ((np.abs(v - box.v0) < tol_u) | (np.abs(v - box.v1) < tol_u))
    max_step = max(grid.du, grid.dv)
    scale = max(1.0, abs(level))
    for _ in range(NEWTON_STEPS):
        r = field.values(u, v) - level
        if np.all(np.abs(r) <= LEVEL_TOLERANCE * scale):
            break
        fu, fv = field.param_gradient(u, v)
        fu = np.where(on_u_edge, 0.0, fu)
        fv = np.where(on_v_edge, 0.0, fv)
        g2 = fu * fu + fv * fv
        ok = g2 > 0.0
        safe = np.where(ok, g2, 1.0)
        su = np.where(ok, -r * fu / safe, 0.0)
        sv = np.where(ok, -r * fv / safe, 0.0)
        small = np.hypot(su, sv) <= max_step
        u = np.where(small, u + su, u)
        v = np.where(small, v + sv, v)
    residual = np.max(np.abs(field.values(u, v) - level)) if u.size else 0.0
    if residual > LEVEL_TOLERANCE * scale:
        logger.debug(f"Level {level:.6g}: refinement residual {residual:.3e}")
    return u, v


def near_critical_point(field: ScalarField, t: float, grid: SampleGrid,
                        values: Optional[np.ndarray] = None) -> Optional[Tuple[float, float]]:
    """
    First grid node that is both close to the level and nearly critical.

    A node is close when |f - t| < 1e-3 (max f - min f) and nearly critical
    when |grad f| < 1e-4 max |grad f| over the grid.
    """
    U, V = grid.nodes()
    if values is None:
        values = field.values(U, V)
    grad = field.gradient_norm(U, V)
    eps_node = 1e-3 * float(np.max(values) - np.min(values))
    eps_crit = 1e-4 * float(np.max(grad))
    suspicious = (np.abs(values - t) < eps_node) & (grad < eps_crit)
    if not np.any(suspicious):
        return None
    i, j = np.argwhere(suspicious)[0]
    return float(U[i, j]), float(V[i, j])


def extract_level_set(field: ScalarField, t: float, grid: SampleGrid, refine: bool = True) -> LevelSet:
    """
    Extract the level curve {field = t} on a sample grid.

    Args:
        field: Scalar field on grid.surface
        t: Level
        grid: Node lattice
        refine: Newton-refine vertices onto the level

    Returns:
        LevelSet with open arcs and cycles (possibly empty)

    Raises:
        LevelSetError: near-critical level
    """
    U, V = grid.nodes()
    values = field.values(U, V)
    witness = near_critical_point(field, t, grid, values)
    if witness is not None:
        raise LevelSetError(f"Near-critical level t={t:.6g} at (u,v)=({witness[0]:.6g}, {witness[1]:.6g})", t)

    padded = _padded_values(grid, values)
    periodic = (grid.box.periodic_u, grid.box.periodic_v)
    pieces = measure.find_contours(padded, t, fully_connected="low")
    chains = _stitch(pieces, padded.shape, periodic)

    box = grid.box
    components = []
    for cid, (chain, closed) in enumerate(chains):
        u = box.u0 + chain[:, 0] * grid.du
        v = box.v0 + chain[:, 1] * grid.dv
        if refine and u.size:
            u, v = _refine(field, grid, t, u, v)
        keep = np.ones(u.size, dtype=bool)
        keep[1:] = np.hypot(np.diff(u), np.diff(v)) > 1e-12 * box.extent
        if closed:
            keep[-1] = True
        u, v = u[keep], v[keep]
        if u.size < 2:
            continue
        touches = not closed
        components.append(Polyline(u, v, closed, touches_boundary=touches, component_id=len(components)))

    levelset = LevelSet(grid.surface, float(t), components, field)
    logger.debug(f"Level {t:.6g} of {field.name}: {levelset.n_open} arcs, {levelset.n_cycles} cycles")
    return levelset


# ---------------------------------------------------------------------------
# Superlevel components
# ---------------------------------------------------------------------------

@dataclass
class SuperlevelComponents:
    field: ScalarField
    tau: float
    grid: SampleGrid
    labels: np.ndarray
    count: int
    touches_boundary: List[bool]
    representatives: List[Tuple[float, float]]
    maxima: List[float]
    resolved: Optional[bool] = None
    values: np.ndarray = field(default=None, repr=False)

    @property
    def compact_flags(self) -> List[bool]:
        """True for components that stay away from the truncation boundary."""
        return [not t for t in self.touches_boundary]

    def mask(self, k: int) -> np.ndarray:
        return self.labels == (k + 1)

    def label_at(self, u, v) -> np.ndarray:
        """Component index (or -1) of the cells containing the given points."""
        return _cell_lookup(self.grid, self.labels, u, v) - 1


def _cell_index(grid: SampleGrid, u, v) -> Tuple[np.ndarray, np.ndarray]:
    box = grid.box
    u, v = box.wrap(u, v)
    cu, cv = grid.cell_shape
    i = np.clip(np.floor((u - box.u0) / grid.du).astype(int), 0, cu - 1)
    j = np.clip(np.floor((v - box.v0) / grid.dv).astype(int), 0, cv - 1)
    return i, j


def _cell_lookup(grid: SampleGrid, table: np.ndarray, u, v) -> np.ndarray:
    i, j = _cell_index(grid, u, v)
    return table[i, j]


def periodic_label(indicator: np.ndarray, periodic: Tuple[bool, bool]) -> Tuple[np.ndarray, int]:
    """
    Label 4-connected components, merging labels across periodic edges.

    Returns:
        (labels with 0 as background and 1..n consecutive, n)
    """
    labels, n = ndimage.label(indicator)
    if n == 0:
        return labels, 0
    rows, cols = [], []
    if periodic[0]:
        a, b = labels[0, :], labels[-1, :]
        both = (a > 0) & (b > 0)
        rows.extend(a[both])
        cols.extend(b[both])
    if periodic[1]:
        a, b = labels[:, 0], labels[:, -1]
        both = (a > 0) & (b > 0)
        rows.extend(a[both])
        cols.extend(b[both])
    if not rows:
        return labels, n
    graph = coo_matrix((np.ones(len(rows)), (np.asarray(rows) - 1, np.asarray(cols) - 1)), shape=(n, n))
    n_merged, merged = connected_components(graph, directed=False)
    # keep the order of first appearance so labels are deterministic
    lookup = np.zeros(n + 1, dtype=int)
    order = {}
    for old in range(1, n + 1):
        root = merged[old - 1]
        if root not in order:
            order[root] = len(order) + 1
        lookup[old] = order[root]
    return lookup[labels], n_merged


def _count_components(field: ScalarField, tau: float, grid: SampleGrid) -> int:
    Uc, Vc = grid.cell_centers()
    _, n = periodic_label(field.values(Uc, Vc) > tau, (grid.box.periodic_u, grid.box.periodic_v))
    return n


def superlevel_components(field: ScalarField, tau: float, grid: SampleGrid,
                          check_refinement: bool = False) -> SuperlevelComponents:
    """
    Label the components of {field > tau} on grid cells.

    Cells are classified by the field value at their centre; adjacency is
    4-connected and wraps across periodic axes. A component touching a
    non-periodic edge of the box is flagged as touching the truncation boundary.
    """
    Uc, Vc = grid.cell_centers()
    values = field.values(Uc, Vc)
    periodic = (grid.box.periodic_u, grid.box.periodic_v)
    labels, n = periodic_label(values > tau, periodic)

    edge = np.zeros(labels.shape, dtype=bool)
    if not periodic[0]:
        edge[0, :] = edge[-1, :] = True
    if not periodic[1]:
        edge[:, 0] = edge[:, -1] = True

    touches, reps, maxima = [], [], []
    if n:
        index = np.arange(1, n + 1)
        touching = set(np.unique(labels[edge & (labels > 0)]).tolist())
        positions = ndimage.maximum_position(values, labels, index)
        peak = ndimage.maximum(values, labels, index)
        for k in range(n):
            touches.append((k + 1) in touching)
            i, j = positions[k]
            reps.append((float(Uc[i, j]), float(Vc[i, j])))
            maxima.append(float(peak[k]))

    resolved = None
    if check_refinement:
        resolved = _count_components(field, tau, grid.refined(2)) == n
        if not resolved:
            logger.warning(f"Superlevel {field.name} > {tau:.6g}: component count unresolved at this grid")

    return SuperlevelComponents(field, float(tau), grid, labels, n, touches, reps, maxima,
                                resolved=resolved, values=values)


def is_nested(inner: SuperlevelComponents, outer: SuperlevelComponents) -> bool:
    """Every inner component lies inside exactly one outer component."""
    for k in range(inner.count):
        parents = np.unique(outer.labels[inner.mask(k)])
        if parents.size != 1 or parents[0] == 0:
            return False
    return True


def boundary_ring(components: SuperlevelComponents, k: int) -> np.ndarray:
    """Cells of component k adjacent to its complement or to the truncation edge."""
    mask = components.mask(k)
    return mask & ~ndimage.binary_erosion(mask, border_value=0)


def maximum_on_ring(components: SuperlevelComponents, k: int) -> bool:
    """Component maximum attained within one cell of its boundary ring."""
    ring = ndimage.binary_dilation(boundary_ring(components, k))
    masked = np.where(components.mask(k), components.values, -np.inf)
    i, j = np.unravel_index(np.argmax(masked), masked.shape)
    return bool(ring[i, j])


def crossed_cells(levelset: LevelSet, grid: SampleGrid) -> np.ndarray:
    """Boolean cell mask of cells containing a level-set vertex."""
    mask = np.zeros(grid.cell_shape, dtype=bool)
    u, v = levelset.vertices()
    if u.size:
        i, j = _cell_index(grid, u, v)
        mask[i, j] = True
    return mask


# ---------------------------------------------------------------------------
# Restriction of a level set to a region
# ---------------------------------------------------------------------------

def _inside_component(components: SuperlevelComponents, k: int, u, v) -> np.ndarray:
    """Point lies in {f > tau} and in (or next to) a cell of component k."""
    above = components.field.values(u, v) > components.tau
    grown = ndimage.binary_dilation(components.mask(k), structure=np.ones((3, 3), dtype=bool))
    return above & _cell_lookup(components.grid, grown, u, v)


def _corner(h: ScalarField, f: ScalarField, level: float, tau: float,
            u: float, v: float) -> Tuple[float, float]:
    """Newton solve of h = level, f = tau near (u, v)."""
    for _ in range(NEWTON_STEPS):
        r = np.array([float(h.values(u, v)) - level, float(f.values(u, v)) - tau])
        if np.max(np.abs(r)) <= LEVEL_TOLERANCE * max(1.0, abs(level), abs(tau)):
            break
        hu, hv = h.param_gradient(u, v)
        fu, fv = f.param_gradient(u, v)
        jac = np.array([[float(hu), float(hv)], [float(fu), float(fv)]])
        if abs(np.linalg.det(jac)) < 1e-14:
            break
        du, dv = np.linalg.solve(jac, -r)
        u, v = u + du, v + dv
    return float(u), float(v)


def restrict_level_set(levelset: LevelSet, components: SuperlevelComponents, k: int) -> LevelSet:
    """
    Intersect a level set with superlevel component k.

    Vertex runs inside the component become open arcs whose ends are moved
    onto {f = tau}; cycles entirely inside stay cycles.
    """
    f = components.field
    h = levelset.field
    pieces: List[Polyline] = []
    for comp in levelset.components:
        inside = _inside_component(components, k, comp.u, comp.v)
        if np.all(inside):
            pieces.append(Polyline(comp.u, comp.v, comp.closed, comp.touches_boundary))
            continue
        if not np.any(inside):
            continue
        u, v, flags = comp.u, comp.v, inside
        if comp.closed:
            # drop the repeated vertex and start at an outside vertex
            u, v, flags = u[:-1], v[:-1], flags[:-1]
            shift = int(np.argmin(flags))
            u, v, flags = np.roll(u, -shift), np.roll(v, -shift), np.roll(flags, -shift)
            u, v, flags = np.append(u, u[0]), np.append(v, v[0]), np.append(flags, flags[0])
            box = levelset.surface.box
            u = _unwrap(u, box.width, box.periodic_u)
            v = _unwrap(v, box.height, box.periodic_v)
        runs = _true_runs(flags)
        for a, b in runs:
            ru, rv = list(u[a:b]), list(v[a:b])
            touches = False
            for end, (i_in, i_out) in (("start", (a, a - 1)), ("end", (b - 1, b))):
                if 0 <= i_out < u.size:
                    cu, cv = _clip_point(f, components.tau, u[i_in], v[i_in], u[i_out], v[i_out])
                    if h is not None:
                        cu, cv = _corner(h, f, levelset.level, components.tau, cu, cv)
                    if end == "start":
                        ru.insert(0, cu)
                        rv.insert(0, cv)
                    else:
                        ru.append(cu)
                        rv.append(cv)
                else:
                    touches = True
            if len(ru) >= 2:
                pieces.append(Polyline(np.asarray(ru), np.asarray(rv), False, touches))
    for cid, p in enumerate(pieces):
        p.component_id = cid
    return LevelSet(levelset.surface, levelset.level, pieces, levelset.field)


def _unwrap(x: np.ndarray, period: float, periodic: bool) -> np.ndarray:
    if not periodic or x.size < 2:
        return x
    d = np.diff(x)
    d = d - period * np.round(d / period)
    return np.concatenate([x[:1], x[0] + np.cumsum(d)])


def _true_runs(flags: np.ndarray) -> List[Tuple[int, int]]:
    runs = []
    k = 0
    n = flags.size
    while k < n:
        if flags[k]:
            s = k
            while k < n and flags[k]:
                k += 1
            runs.append((s, k))
        else:
            k += 1
    return runs


def _clip_point(f: ScalarField, tau: float, u_in, v_in, u_out, v_out) -> Tuple[float, float]:
    """Linear estimate of the crossing of {f = tau} on a segment."""
    f_in = float(f.values(u_in, v_in))
    f_out = float(f.values(u_out, v_out))
    s = (f_in - tau) / (f_in - f_out) if f_in != f_out else 0.5
    s = float(np.clip(s, 0.0, 1.0))
    return float(u_in + s * (u_out - u_in)), float(v_in + s * (v_out - v_in))


# ---------------------------------------------------------------------------
# Pointwise checks along level curves
# ---------------------------------------------------------------------------

def gradient_decomposition_residual(levelset: LevelSet, f: ScalarField) -> float:
    """
    max | |grad f|^2 - <grad f, T>^2 - <grad f, n>^2 | / |grad f|^2 on vertices,
    with n = grad h/|grad h| and T = normal x n the level-curve tangent.
    """
    if levelset.field is None or levelset.is_empty:
        raise LevelSetError("Gradient decomposition needs a non-empty extracted level set")
    u, v = levelset.vertices()
    gf, nf = f.gradient(u, v)
    gh, nh = levelset.field.gradient(u, v)
    usable = (nh > 0.0) & (nf > 0.0)
    if not np.any(usable):
        return 0.0
    n = gh[usable] / nh[usable][:, None]
    tangent = np.cross(levelset.surface.normal(u[usable], v[usable]), n)
    g = gf[usable]
    residual = np.abs(np.sum(g * g, axis=-1) - np.sum(g * tangent, axis=-1) ** 2 - np.sum(g * n, axis=-1) ** 2)
    return float(np.max(residual / (nf[usable] ** 2)))
