"""Degree diagnostics, atom detection, dual distances, reflection and slicing checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
import scipy.sparse as sp
import triangle as tr
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components

from .energy import EnergyReport, gl_energy, jacobian_field
from .errors import CoreCrossingError, PreconditionError, ResolutionError
from .field import Field
from .geometry import Domain, perp
from .mesh import TriMesh
from .quadrature import DUNAVANT8, gauss01, quadrature_points
from .vortices import AtomicMeasure

__all__ = [
    "ChartMeasure",
    "HalfDiskField",
    "WindingResult",
    "bad_set_measure",
    "boundary_current_check",
    "boundary_modulus_error",
    "circle_loop",
    "detect_atoms",
    "dual_distance",
    "half_disk_mesh",
    "jacobian_pairing",
    "level_set_degree",
    "reflect_extend",
    "sobolev_norm_squared",
    "winding_number",
]

TWO_PI = 2.0 * math.pi


def _values_at(u: Any, points: np.ndarray) -> np.ndarray:
    if callable(u) and not hasattr(u, "evaluate"):
        return np.asarray(u(points), dtype=float)
    return np.asarray(u.evaluate(points), dtype=float)


def _wrap(x: np.ndarray) -> np.ndarray:
    return np.mod(x + math.pi, TWO_PI) - math.pi


# ---------------------------------------------------------------------------
# winding numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindingResult:
    """Integer degree, the raw circulation ``(1/2pi) int u x du / |u|^2`` and its distance to the integer."""

    degree: int
    raw: float

    @property
    def distance(self) -> float:
        return abs(self.raw - self.degree)

    def __int__(self) -> int:
        return self.degree


def circle_loop(center: Sequence[float], radius: float, n: int = 512,
                start: float = 0.0, stop: float = TWO_PI) -> np.ndarray:
    """Counterclockwise samples of a circle (or arc, endpoints included for arcs)."""
    closed = math.isclose(stop - start, TWO_PI)
    t = np.linspace(start, stop, n, endpoint=not closed)
    return np.asarray(center, dtype=float) + radius * np.stack([np.cos(t), np.sin(t)], axis=1)


def _phase_increments(vals: np.ndarray, closed: bool) -> tuple[np.ndarray, np.ndarray]:
    """Wrapped phase increments and midpoint circulation increments along samples."""
    nxt = np.roll(vals, -1, axis=0) if closed else vals[1:]
    cur = vals if closed else vals[:-1]
    wrapped = _wrap(np.arctan2(nxt[:, 1], nxt[:, 0]) - np.arctan2(cur[:, 1], cur[:, 0]))
    mid = 0.5 * (cur + nxt)
    du = nxt - cur
    circ = (mid[:, 0] * du[:, 1] - mid[:, 1] * du[:, 0]) / np.sum(mid * mid, axis=1)
    return wrapped, circ


def winding_number(u: Any, loop: np.ndarray, *, threshold: float = 0.5) -> WindingResult:
    """Degree of ``u / |u|`` along a closed polyline.

    ``u`` is a :class:`Field`, anything with an ``evaluate(points)`` method,
    or a callable returning (K, 2) values.  The polyline is treated as closed;
    a repeated final vertex is dropped.

    Raises
    ------
    CoreCrossingError
        ``|u| < threshold`` at some loop sample.
    """
    loop = np.asarray(loop, dtype=float)
    if len(loop) > 1 and np.allclose(loop[0], loop[-1]):
        loop = loop[:-1]
    vals = _values_at(u, loop)
    mod = np.linalg.norm(vals, axis=1)
    if np.any(mod < threshold):
        raise CoreCrossingError(f"|u| drops to {mod.min():.3g} < {threshold} on the loop")
    wrapped, circ = _phase_increments(vals, closed=True)
    degree = int(round(float(wrapped.sum()) / TWO_PI))
    return WindingResult(degree, float(circ.sum()) / TWO_PI)


def level_set_degree(u: Any, d: Domain, j: int, t: float, *, n: int = 2048,
                     threshold: float = 0.5) -> tuple[float, int]:
    """Half current ``1/2 int ju . t`` along the curve at collar depth ``t`` from component ``j``.

    The curve is traversed along the tangent of component ``j``; the degree
    is ``round(half_current / pi)``.
    """
    comp = d.components[j]
    s = np.arange(n) * comp.length / n
    pts = d.collar_map(j, s, t)
    vals = _values_at(u, pts)
    mod = np.linalg.norm(vals, axis=1)
    if np.any(mod < threshold):
        raise CoreCrossingError(f"|u| drops to {mod.min():.3g} < {threshold} on the level curve")
    nxt = np.roll(vals, -1, axis=0)
    mid = 0.5 * (vals + nxt)
    du = nxt - vals
    half = 0.5 * float(np.sum(mid[:, 0] * du[:, 1] - mid[:, 1] * du[:, 0]))
    return half, int(round(half / math.pi))


def boundary_current_check(u: Field, d: Domain, j: int, *, skip_below: float = 1e-6,
                           bc_tol: float = 1e-6) -> float:
    """``max |ju . tau - |u|^2 kappa|`` over boundary nodes of component ``j``.

    ``ju . tau`` is the centered phase difference times ``|u|^2``.  Nodes
    where ``|u|`` (or a neighbour's) is below ``skip_below`` are skipped.

    Raises
    ------
    PreconditionError
        ``|u . tau| > bc_tol`` at some boundary node.
    """
    mesh = u.mesh
    comp = d.components[j]
    nodes, s = mesh.component_nodes(j)
    vals = u.values[nodes]
    tau = comp.tangent_at(s)
    viol = np.abs(np.sum(vals * tau, axis=1))
    if np.max(viol) > bc_tol:
        raise PreconditionError(f"tangential part {np.max(viol):.3g} exceeds {bc_tol} on component {j}")
    mod2 = np.sum(vals * vals, axis=1)
    ph = np.arctan2(vals[:, 1], vals[:, 0])
    prev = np.roll(np.arange(len(nodes)), 1)
    nxt = np.roll(np.arange(len(nodes)), -1)
    ds = np.mod(s[nxt] - s[prev], comp.length)
    jt = _wrap(ph[nxt] - ph[prev]) / ds * mod2
    ok = (mod2 >= skip_below ** 2) & (mod2[prev] >= skip_below ** 2) & (mod2[nxt] >= skip_below ** 2)
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(jt - mod2 * comp.curvature_at(s))[ok]))


# ---------------------------------------------------------------------------
# atom detection
# ---------------------------------------------------------------------------


def detect_atoms(u: Field, d: Domain, *, threshold: float = 0.5, n_loop: int = 720) -> AtomicMeasure:
    """Locate vortex cores of ``u`` and assign Jacobian weights.

    Cores are connected clusters of mesh nodes with ``|u| < threshold``,
    located at their node of smallest modulus.  An interior core gets weight
    ``pi * winding`` on an enclosing circle; a core touching the boundary
    gets ``(pi/2) * round(Delta / pi)``, where ``Delta`` is the phase
    increment of ``u`` along the half circle ``c + r (cos a tau + sin a nu)``,
    ``0 <= a <= pi``, around the boundary foot point ``c``.

    Raises
    ------
    ResolutionError
        Cores too close to be separated by their enclosing circles.
    """
    mesh = u.mesh
    mod = u.modulus()
    low = mod < threshold
    if not np.any(low):
        return AtomicMeasure()
    e = mesh.edges
    e = e[low[e[:, 0]] & low[e[:, 1]]]
    g = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(mesh.n_nodes,) * 2)
    _, labels = connected_components(g, directed=False)
    idx = np.flatnonzero(low)
    clusters = [idx[labels[idx] == lab] for lab in np.unique(labels[idx])]
    is_bnd = mesh.is_boundary_node
    hloc = mesh.local_size(mesh.nodes[[c[np.argmin(mod[c])] for c in clusters]], 0.0)
    centers, radii, kinds = [], [], []
    for c, hl in zip(clusters, hloc):
        k = c[np.argmin(mod[c])]
        p = mesh.nodes[k]
        extent = float(np.max(np.linalg.norm(mesh.nodes[c] - p, axis=1)))
        boundary = bool(np.any(is_bnd[c]))
        if boundary:
            cb = c[is_bnd[c]]
            k = cb[np.argmin(mod[cb])]
            p = mesh.nodes[k]
        centers.append(p)
        radii.append(max(2.0 * extent, 3.0 * hl))
        kinds.append(boundary)
    centers = np.array(centers)
    locs, units = [], []
    for i, (p, r, boundary) in enumerate(zip(centers, radii, kinds)):
        others = np.delete(np.arange(len(centers)), i)
        if len(others) and np.min(np.linalg.norm(centers[others] - p, axis=1) - np.array(radii)[others]) <= r:
            raise ResolutionError("vortex cores overlap; refine the mesh or reduce eps")
        if boundary:
            comp, s, _ = d.project(p[None])
            cidx, sc = int(comp[0]), float(s[0])
            cc = d.components[cidx]
            foot = cc.point(sc)
            tau = cc.tangent_at(sc)
            nu = perp(tau)
            a = np.linspace(0.0, math.pi, n_loop // 2 + 1)
            arc = foot + r * (np.cos(a)[:, None] * tau + np.sin(a)[:, None] * nu)
            vals = _values_at(u, arc)
            if np.any(np.linalg.norm(vals, axis=1) < threshold):
                raise ResolutionError("half circle around a boundary core crosses a low-modulus region")
            wrapped, _ = _phase_increments(vals, closed=False)
            unit = int(round(float(wrapped.sum()) / math.pi))
            loc = foot
        else:
            dist = float(np.min(np.linalg.norm(mesh.nodes[mesh.boundary_nodes] - p, axis=1)))
            if r >= dist:
                raise ResolutionError("enclosing circle of an interior core leaves the domain")
            try:
                unit = 2 * winding_number(u, circle_loop(p, r, n_loop), threshold=threshold).degree
            except CoreCrossingError as exc:
                raise ResolutionError(str(exc)) from None
            loc = p
        if unit:
            locs.append(loc)
            units.append(unit)
    return AtomicMeasure(np.array(locs).reshape(-1, 2), np.array(units, dtype=np.int64))


# ---------------------------------------------------------------------------
# dual distance
# ---------------------------------------------------------------------------


def dual_distance(m1: AtomicMeasure, m2: AtomicMeasure, R: float) -> float:
    """Bounded-Lipschitz distance ``sup <m1 - m2, phi>`` over ``|phi| <= R``, ``Lip(phi) <= 1``.

    Solved exactly as a linear program in the values of ``phi`` at the atoms.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    loc = np.vstack([m1.locations, m2.locations])
    w = np.concatenate([m1.weights, -m2.weights])
    if len(loc) == 0:
        return 0.0
    uniq, inv = np.unique(np.round(loc, 14), axis=0, return_inverse=True)
    inv = np.asarray(inv).reshape(-1)
    c = np.zeros(len(uniq))
    np.add.at(c, inv, w)
    n = len(uniq)
    if n == 1:
        return float(abs(c[0]) * R)
    i, j = np.where(~np.eye(n, dtype=bool))
    A = np.zeros((len(i), n))
    A[np.arange(len(i)), i] = 1.0
    A[np.arange(len(i)), j] = -1.0
    b = np.linalg.norm(uniq[i] - uniq[j], axis=1)
    res = linprog(-c, A_ub=A, b_ub=b, bounds=[(-R, R)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(f"dual-distance LP failed: {res.message}")
    return max(0.0, float(-res.fun))


# ---------------------------------------------------------------------------
# reflection across a flat boundary
# ---------------------------------------------------------------------------


def half_disk_mesh(r: float = 1.0, h: float = 0.1) -> TriMesh:
    """Quality triangulation of ``{|x| < r, x2 > 0}``."""
    n_arc = max(8, int(math.ceil(math.pi * r / h)))
    n_flat = max(2, int(math.ceil(2 * r / h)))
    t = np.linspace(0.0, math.pi, n_arc + 1)
    arc = r * np.stack([np.cos(t), np.sin(t)], axis=1)
    flat = np.stack([np.linspace(-r, r, n_flat + 1)[1:-1], np.zeros(n_flat - 1)], axis=1)
    pts = np.vstack([arc, flat])
    nb = len(pts)
    seg = np.stack([np.arange(nb), (np.arange(nb) + 1) % nb], axis=1)
    out = tr.triangulate({"vertices": pts, "segments": seg}, f"pq30Ya{0.5 * h * h:.12g}")
    nodes = out["vertices"]
    nodes[np.abs(nodes[:, 1]) < 1e-14, 1] = 0.0
    tris = out["triangles"]
    v = nodes[tris]
    area = 0.5 * ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
                  - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1]))
    tris = np.where((area < 0)[:, None], tris[:, ::-1], tris)
    return TriMesh(nodes, tris, boundary_nodes=np.arange(nb), boundary_component=np.zeros(nb, dtype=int),
                   boundary_s=np.r_[r * t, math.pi * r + r + flat[:, 0]],
                   boundary_edges=seg, boundary_edge_component=np.zeros(nb, dtype=int))


@dataclass(frozen=True, eq=False)
class HalfDiskField:
    """A 2-vector P1 field on a mesh of the half disk ``B_{r,+}(0)``."""

    field: Field
    r: float

    @property
    def mesh(self) -> TriMesh:
        return self.field.mesh

    @property
    def flat_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.mesh.nodes[:, 1] == 0.0)

    @property
    def tangential_trace(self) -> np.ndarray:
        """First component of ``u`` at the nodes on ``{x2 = 0}``."""
        return self.field.values[self.flat_nodes, 0]


def reflect_extend(u: HalfDiskField, *, tol: float = 1e-10) -> Field:
    """Extend to the full disk by ``(-u1, u2)(x1, -x2)`` on the mirrored mesh.

    Raises
    ------
    PreconditionError
        The first component of ``u`` does not vanish on the flat edge.
    """
    tr_ = u.tangential_trace
    if tr_.size and np.max(np.abs(tr_)) > tol:
        raise PreconditionError(f"tangential trace {np.max(np.abs(tr_)):.3g} on the flat edge exceeds {tol}")
    mesh = u.mesh
    N = mesh.n_nodes
    flat = mesh.nodes[:, 1] == 0.0
    mirror = np.arange(N)
    off = np.flatnonzero(~flat)
    mirror[off] = N + np.arange(len(off))
    nodes = np.vstack([mesh.nodes, mesh.nodes[off] * np.array([1.0, -1.0])])
    tris = np.vstack([mesh.triangles, mirror[mesh.triangles][:, ::-1]])
    vals = u.field.values
    ext = np.vstack([vals, vals[off] * np.array([-1.0, 1.0])])
    ext[np.flatnonzero(flat), 0] = 0.0
    bn = np.flatnonzero(np.isclose(np.linalg.norm(nodes, axis=1), u.r))
    full = TriMesh(nodes, tris, boundary_nodes=bn, boundary_component=np.zeros(len(bn), dtype=int),
                   boundary_s=np.mod(np.arctan2(nodes[bn, 1], nodes[bn, 0]), TWO_PI) * u.r)
    return Field(full, ext)


def sobolev_norm_squared(u: Field) -> float:
    """``||u||_{L2}^2 + ||grad u||_{L2}^2`` for a P1 field (exact)."""
    v = u.values.reshape(u.mesh.n_nodes, -1)
    M, K = u.mesh.mass, u.mesh.stiffness
    return float(np.sum(v * (M @ v)) + np.sum(v * (K @ v)))


def jacobian_pairing(u: Field, phi: Callable[[np.ndarray], np.ndarray]) -> float:
    """``int Ju phi`` with ``Ju`` piecewise constant and ``phi`` by the degree-8 rule."""
    J = jacobian_field(u).values
    qp, qw = quadrature_points(u.mesh)
    vals = np.asarray(phi(qp.reshape(-1, 2))).reshape(qw.shape)
    return float(np.sum(J * np.sum(qw * vals, axis=1)))


def half_disk_energy(u: HalfDiskField, eps: float) -> EnergyReport:
    return gl_energy(u.field, eps)


# ---------------------------------------------------------------------------
# slicing diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChartMeasure:
    """Bad-set size on one boundary chart ``y1 in [start, stop)`` of component ``component``."""

    component: int
    chart: int
    start: float
    stop: float
    measure: float
    reference: float

    def to_dict(self) -> dict[str, Any]:
        return dict(vars(self))


def bad_set_measure(u: Any, d: Domain, eps: float, beta: float = 0.125, *,
                    n_y2: int = 33, samples_per_unit: float | None = None) -> list[ChartMeasure]:
    """Measure of ``y1`` whose normal segment ``y2 in [0, r/2]`` meets ``||u| - 1| > eps^beta``.

    Each boundary component is cut into charts of length about the collar
    radius ``r``; ``y1`` is sampled at a quarter of the boundary sample spacing unless
    ``samples_per_unit`` is given.  ``reference`` is ``eps^(1/4)``.
    """
    r1 = d.collar_radius
    level = eps ** beta
    y2 = np.linspace(0.0, 0.5 * r1, n_y2)
    out = []
    for j, comp in enumerate(d.components):
        L = comp.length
        n_y1 = 4 * comp.n if samples_per_unit is None else max(8, int(math.ceil(L * samples_per_unit)))
        y1 = (np.arange(n_y1) + 0.5) * L / n_y1
        Y1, Y2 = np.meshgrid(y1, y2, indexing="ij")
        pts = d.collar_map(j, Y1.ravel(), Y2.ravel())
        mod = np.linalg.norm(_values_at(u, pts), axis=1).reshape(Y1.shape)
        bad = np.any(np.abs(mod - 1.0) > level, axis=1)
        n_ch = max(1, int(round(L / r1)))
        edges = np.linspace(0.0, L, n_ch + 1)
        which = np.minimum(np.searchsorted(edges, y1, side="right") - 1, n_ch - 1)
        for k in range(n_ch):
            sel = which == k
            out.append(ChartMeasure(j, k, float(edges[k]), float(edges[k + 1]),
                                    float(np.sum(bad[sel]) * L / n_y1), eps ** 0.25))
    return out


def boundary_modulus_error(u: Any, d: Domain, *, n_per_component: int = 8192) -> float:
    """``|| |u|^2 - 1 ||_{L2(boundary)}`` by composite Gauss quadrature on the curves."""
    x, w = gauss01(4)
    total = 0.0
    for comp in d.components:
        L = comp.length
        edges = np.linspace(0.0, L, n_per_component + 1)
        s = (edges[:-1, None] + (L / n_per_component) * x[None]).ravel()
        ws = np.tile(w * L / n_per_component, n_per_component)
        vals = _values_at(u, comp.point(s))
        total += float(np.sum(ws * (np.sum(vals * vals, axis=1) - 1.0) ** 2))
    return math.sqrt(total)
