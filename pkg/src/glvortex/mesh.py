"""Triangular meshes, P1 finite elements and point location."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Sequence

import numpy as np
import scipy.sparse as sp
import triangle as tr
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from shapely.geometry import Point

from .errors import MeshError

if TYPE_CHECKING:
    from .geometry import Domain

__all__ = ["TriMesh", "triangulate_domain", "SizeField", "write_mesh_csv"]


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation with boundary bookkeeping.

    Attributes
    ----------
    nodes : (N, 2) array
    triangles : (M, 3) int array, counterclockwise
    boundary_nodes : (B,) int array
        Indices of nodes on the boundary curves.
    boundary_component, boundary_s : (B,) arrays
        Component index and arclength of each boundary node.
    boundary_edges : (E, 2) int array
        Boundary edges ordered along the tangent of their component.
    boundary_edge_component : (E,) int array
    marked_nodes : (P,) int array
        Nodes inserted at requested points: interior points first, then
        boundary points, each in request order.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    boundary_component: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    boundary_s: np.ndarray = field(default_factory=lambda: np.zeros(0))
    boundary_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    boundary_edge_component: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    marked_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self) -> None:
        for name, dtype in (
            ("nodes", float), ("triangles", np.int64), ("boundary_nodes", np.int64),
            ("boundary_component", np.int64), ("boundary_s", float), ("boundary_edges", np.int64),
            ("boundary_edge_component", np.int64), ("marked_nodes", np.int64),
        ):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.boundary_edges.size == 0:
            object.__setattr__(self, "boundary_edges", self.boundary_edges.reshape(0, 2))

    # -- basic geometry ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def vertices(self) -> np.ndarray:
        """Triangle vertex coordinates, shape (M, 3, 2)."""
        return self.nodes[self.triangles]

    @cached_property
    def signed_areas(self) -> np.ndarray:
        v = self.vertices
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices.mean(axis=1)

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """Gradients of the three hat functions on each triangle, (M, 3, 2)."""
        v = self.vertices
        a2 = 2.0 * self.signed_areas
        g = np.empty((self.n_triangles, 3, 2))
        for k in range(3):
            p = v[:, (k + 1) % 3]
            q = v[:, (k + 2) % 3]
            g[:, k, 0] = (p[:, 1] - q[:, 1]) / a2
            g[:, k, 1] = (q[:, 0] - p[:, 0]) / a2
        return g

    @cached_property
    def diameters(self) -> np.ndarray:
        v = self.vertices
        return np.max(np.stack([np.linalg.norm(v[:, i] - v[:, (i + 1) % 3], axis=1) for i in range(3)]), axis=0)

    @cached_property
    def min_angles(self) -> np.ndarray:
        v = self.vertices
        out = np.full(self.n_triangles, np.pi)
        for k in range(3):
            a = v[:, (k + 1) % 3] - v[:, k]
            b = v[:, (k + 2) % 3] - v[:, k]
            cosang = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            out = np.minimum(out, np.arccos(np.clip(cosang, -1.0, 1.0)))
        return out

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (i < j), shape (K, 2)."""
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def is_boundary_node(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    def component_nodes(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Boundary nodes of component ``j`` sorted by arclength, with arclengths."""
        sel = self.boundary_component == j
        nodes = self.boundary_nodes[sel]
        s = self.boundary_s[sel]
        order = np.argsort(s)
        return nodes[order], s[order]

    def local_size(self, points: np.ndarray, radius: float) -> np.ndarray:
        """Largest diameter of triangles with a vertex within ``radius`` of each point."""
        points = np.atleast_2d(points)
        tree = self._node_tree
        out = np.zeros(len(points))
        tri_of_node = self._node_triangles
        for i, p in enumerate(points):
            idx = tree.query_ball_point(p, radius)
            if not idx:
                idx = [int(tree.query(p)[1])]
            tris = np.unique(np.concatenate([tri_of_node[k] for k in idx]))
            out[i] = self.diameters[tris].max()
        return out

    @cached_property
    def _node_tree(self) -> cKDTree:
        return cKDTree(self.nodes)

    @cached_property
    def _node_triangles(self) -> list[np.ndarray]:
        order = np.argsort(self.triangles.ravel(), kind="stable")
        tri_idx = order // 3
        counts = np.bincount(self.triangles.ravel(), minlength=self.n_nodes)
        return np.split(tri_idx, np.cumsum(counts)[:-1])

    # -- finite element matrices --------------------------------------------

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        g = self.shape_gradients
        local = np.einsum("tid,tjd->tij", g, g) * self.areas[:, None, None]
        return self._assemble(local)

    @cached_property
    def mass(self) -> sp.csr_matrix:
        base = (np.ones((3, 3)) + np.eye(3)) / 12.0
        local = base[None] * self.areas[:, None, None]
        return self._assemble(local)

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        return np.bincount(self.triangles.ravel(), weights=np.repeat(self.areas / 3.0, 3), minlength=self.n_nodes)

    def _assemble(self, local: np.ndarray) -> sp.csr_matrix:
        t = self.triangles
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        m = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(self.n_nodes, self.n_nodes))
        return m.tocsr()

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Per-triangle gradient of a P1 function.

        Scalar values give shape (M, 2); vector values (N, 2) give (M, 2, 2)
        with ``out[t, a, d] = d u_a / d x_d``.
        """
        values = np.asarray(values, dtype=float)
        loc = values[self.triangles]
        g = self.shape_gradients
        if values.ndim == 1:
            return np.einsum("tk,tkd->td", loc, g)
        return np.einsum("tka,tkd->tad", loc, g)

    def mean(self, values: np.ndarray) -> float:
        return float(self.lumped_mass @ values / self.area)

    # -- point location ----------------------------------------------------

    @cached_property
    def _centroid_tree(self) -> cKDTree:
        return cKDTree(self.centroids)

    def barycentric(self, tri: np.ndarray, points: np.ndarray) -> np.ndarray:
        v = self.vertices[tri]
        a2 = 2.0 * self.signed_areas[tri]
        lam = np.empty((len(points), 3))
        for k in range(3):
            p = v[:, (k + 1) % 3]
            q = v[:, (k + 2) % 3]
            lam[:, k] = ((p[:, 0] - points[:, 0]) * (q[:, 1] - points[:, 1])
                         - (p[:, 1] - points[:, 1]) * (q[:, 0] - points[:, 0])) / a2
        return lam

    def locate(self, points: np.ndarray, k: int = 12) -> tuple[np.ndarray, np.ndarray]:
        """Containing triangle and barycentric coordinates of each point.

        Points slightly outside the polygonal mesh (for instance on the
        smooth boundary curve) are assigned to the nearest candidate
        triangle with clipped barycentric coordinates.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k = min(k, self.n_triangles)
        _, cand = self._centroid_tree.query(points, k=k)
        cand = np.atleast_2d(cand).reshape(len(points), k)
        tri = np.full(len(points), -1)
        best = np.full(len(points), -np.inf)
        lam = np.zeros((len(points), 3))
        for col in range(k):
            t = cand[:, col]
            l = self.barycentric(t, points)
            score = l.min(axis=1)
            upd = score > best + 1e-15
            tri[upd] = t[upd]
            best[upd] = score[upd]
            lam[upd] = l[upd]
        bad = best < -0.05
        if np.any(bad):
            # brute force for points far from their nearest centroids
            for i in np.flatnonzero(bad):
                l = self.barycentric(np.arange(self.n_triangles), np.repeat(points[i:i + 1], self.n_triangles, axis=0))
                j = int(np.argmax(l.min(axis=1)))
                tri[i], lam[i] = j, l[j]
        lam = np.clip(lam, 0.0, None)
        lam /= lam.sum(axis=1, keepdims=True)
        return tri, lam

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        tri, lam = self.locate(points)
        loc = np.asarray(values)[self.triangles[tri]]
        if loc.ndim == 2:
            return np.sum(loc * lam, axis=1)
        return np.einsum("pk,pka->pa", lam, loc)

    def connected(self) -> bool:
        e = self.edges
        g = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(self.n_nodes, self.n_nodes))
        return connected_components(g, directed=False)[0] == 1


# ---------------------------------------------------------------------------
# mesh generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SizeField:
    """Target edge length as a function of position.

    ``size(x) = min(h_layer(x), core + grading * max(0, |x - p| - core_radius))``
    with a boundary layer that shrinks the size to ``boundary_factor * h``
    on the boundary and relaxes linearly to ``h`` at depth ``layer``.
    """

    h: float
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    core: float = math.inf
    core_radius: float = 0.0
    grading: float = 0.2
    boundary_factor: float = 0.5
    layer: float = 0.0

    def __call__(self, x: np.ndarray, boundary_distance: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        size = np.full(len(x), float(self.h))
        if self.layer > 0 and self.boundary_factor < 1.0:
            frac = np.clip(boundary_distance / self.layer, 0.0, 1.0)
            size = self.h * (self.boundary_factor + (1.0 - self.boundary_factor) * frac)
        if len(self.points) and np.isfinite(self.core):
            d = np.min(np.linalg.norm(x[:, None, :] - self.points[None, :, :], axis=2), axis=1)
            size = np.minimum(size, self.core + self.grading * np.maximum(d - self.core_radius, 0.0))
        return size


def _boundary_params(comp, forced: np.ndarray, size_fn) -> np.ndarray:
    """Arclength positions of mesh nodes on one component."""
    L = comp.length
    forced = np.unique(np.mod(np.asarray(forced, dtype=float), L))
    if len(forced) == 0:
        forced = np.array([0.0])
    fine = max(8 * comp.n, 4096)
    s_f = np.arange(fine) * (L / fine)
    dens = 1.0 / size_fn(comp.point(s_f))
    out = []
    for k in range(len(forced)):
        a = forced[k]
        b = forced[k + 1] if k + 1 < len(forced) else forced[0] + L
        grid = np.linspace(a, b, max(16, int(np.ceil((b - a) / (L / fine))) + 1))
        dg = np.interp(np.mod(grid, L), np.append(s_f, L), np.append(dens, dens[0]))
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dg[1:] + dg[:-1]) * np.diff(grid))])
        m = max(1, int(np.ceil(cum[-1])))
        if len(forced) == 1:
            m = max(m, 8)
        targets = np.arange(m) * (cum[-1] / m)
        out.append(np.interp(targets, cum, grid))
    return np.mod(np.concatenate(out), L)


def triangulate_domain(
    domain: "Domain",
    h: float,
    *,
    points: Sequence[Sequence[float]] = (),
    boundary_points: Sequence[tuple[int, float]] = (),
    core_size: float | None = None,
    core_radius: float = 0.0,
    grading: float = 0.2,
    boundary_factor: float = 0.5,
    layer: float | None = None,
    min_angle: float = 25.0,
    max_rounds: int = 12,
) -> TriMesh:
    """Quality Delaunay triangulation of a domain.

    Parameters
    ----------
    domain : Domain
    h : float
        Bulk edge length.
    points : sequence of (x, y)
        Interior points that must become mesh nodes.
    boundary_points : sequence of (component, arclength)
        Boundary points that must become mesh nodes.
    core_size, core_radius, grading : float
        Local refinement around all requested points: edge length
        ``core_size`` within ``core_radius``, growing with slope ``grading``.
    boundary_factor, layer : float
        Boundary-layer grading: edge length ``boundary_factor * h`` on the
        boundary, relaxing to ``h`` at depth ``layer`` (default
        ``min(collar_radius, 4 h)``).
    min_angle : float
        Minimum angle in degrees requested from the mesher; the result is
        checked to be at least 20 degrees.
    """
    if not h > 0:
        raise MeshError(f"h must be positive, got {h}")
    comps = domain.components
    h_b = boundary_factor * h
    if domain.collar_radius < 3.0 * h_b:
        raise MeshError(
            f"h = {h:g} is too coarse: fewer than 3 boundary-layer elements fit in the collar "
            f"of width {domain.collar_radius:.4g}"
        )
    pts_in = np.asarray(points, dtype=float).reshape(-1, 2)
    bpts = [(int(j), float(s)) for j, s in boundary_points]
    b_xy = np.array([comps[j].point(s) for j, s in bpts]).reshape(-1, 2)
    refine_pts = np.vstack([pts_in, b_xy])
    if layer is None:
        layer = min(domain.collar_radius, 4.0 * h)
    size = SizeField(
        h=h, points=refine_pts, core=core_size if core_size is not None else math.inf,
        core_radius=core_radius, grading=grading, boundary_factor=boundary_factor, layer=layer,
    )

    tree = cKDTree(np.vstack([c.samples for c in comps]))

    def size_at(x: np.ndarray) -> np.ndarray:
        return size(x, tree.query(x)[0])

    verts, segs, bcomp, bs = [], [], [], []
    offset = 0
    for j, c in enumerate(comps):
        forced = [s for jj, s in bpts if jj == j]
        s_nodes = _boundary_params(c, np.array(forced), lambda x: size_at(x))
        xy = c.point(s_nodes)
        m = len(s_nodes)
        verts.append(xy)
        segs.append(offset + np.c_[np.arange(m), (np.arange(m) + 1) % m])
        bcomp.append(np.full(m, j))
        bs.append(s_nodes)
        offset += m
    n_bnd = offset
    bverts = np.vstack(verts)
    for p in pts_in:
        if not domain.polygon.contains(Point(p)):
            raise MeshError(f"requested interior point {p.tolist()} is not inside the polygonal domain")
    all_verts = np.vstack([bverts, pts_in])
    pslg = {"vertices": all_verts, "segments": np.vstack(segs)}
    if domain.b:
        pslg["holes"] = domain.hole_points()
    area0 = math.sqrt(3.0) / 4.0 * h * h
    opts = f"pq{min_angle:g}Y"
    try:
        out = tr.triangulate(pslg, opts + f"a{area0:.10g}")
        for _ in range(max_rounds):
            v = out["vertices"]
            t = out["triangles"]
            cen = v[t].mean(axis=1)
            target = math.sqrt(3.0) / 4.0 * size_at(cen) ** 2
            e1 = v[t[:, 1]] - v[t[:, 0]]
            e2 = v[t[:, 2]] - v[t[:, 0]]
            area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
            if np.all(area <= 1.5 * target):
                break
            out = dict(out)
            out["triangle_max_area"] = np.minimum(target, area)
            out = tr.triangulate(out, "r" + opts + "a")
    except Exception as exc:  # the C library reports failures as generic errors
        raise MeshError(f"triangulation failed: {exc}") from exc

    nodes = np.asarray(out["vertices"], dtype=float)
    tris = np.asarray(out["triangles"], dtype=np.int64)
    if len(tris) == 0 or not np.allclose(nodes[:n_bnd], bverts):
        raise MeshError("mesher did not preserve the boundary nodes")
    markers = np.asarray(out.get("vertex_markers", np.zeros((len(nodes), 1)))).ravel()
    if np.count_nonzero(markers[n_bnd + len(pts_in):]) > 0:
        raise MeshError("mesher inserted nodes on the boundary")
    v = nodes[tris]
    sa = (v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1]) - (v[:, 1, 1] - v[:, 0, 1]) * (v[:, 2, 0] - v[:, 0, 0])
    flip = sa < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    bcomp_a = np.concatenate(bcomp)
    bs_a = np.concatenate(bs)
    marked = []
    for j, s in bpts:
        sel = np.flatnonzero((bcomp_a == j) & (np.abs(bs_a - np.mod(s, comps[j].length)) < 1e-12 * comps[j].length + 1e-14))
        marked.append(int(sel[0]) if len(sel) else -1)
    interior_marked = list(range(n_bnd, n_bnd + len(pts_in)))
    mesh = TriMesh(
        nodes=nodes,
        triangles=tris,
        boundary_nodes=np.arange(n_bnd),
        boundary_component=bcomp_a,
        boundary_s=bs_a,
        boundary_edges=np.vstack(segs),
        boundary_edge_component=np.concatenate([np.full(len(sg), j) for j, sg in enumerate(segs)]),
        marked_nodes=np.array(interior_marked + marked, dtype=np.int64),
    )
    worst = math.degrees(float(mesh.min_angles.min()))
    if worst < 20.0:
        raise MeshError(f"mesh quality check failed: minimum angle {worst:.2f} < 20 degrees")
    return mesh


def write_mesh_csv(mesh: TriMesh, nodes_path, triangles_path) -> None:
    """Export nodes (``x,y``) and triangles (``i,j,k``) as CSV files."""
    np.savetxt(nodes_path, mesh.nodes, delimiter=",", header="x,y", comments="", fmt="%.17g")
    np.savetxt(triangles_path, mesh.triangles, delimiter=",", header="i,j,k", comments="", fmt="%d")
