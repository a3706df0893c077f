"""Quadrature over triangulations, including singular and clipped integrands.

Regular triangles use the symmetric 16-point Dunavant rule of degree 8.
Triangles close to a singular point ``p`` are split into the three
sub-triangles ``(p, V_k, V_{k+1})`` (signed, so the decomposition is exact
whether or not ``p`` lies inside) and each piece is integrated in polar
coordinates about ``p``.  Radial integration uses ``t = log r`` on
intervals away from ``p``, which makes ``1/r^2`` integrands smooth, and
plain Gauss-Legendre on ``[0, r1]``.  Circles of given radii (excision
discs, the kink of a core profile) are treated as exact breakpoints, both
in radius and in angle, so clipped regions are integrated without
inclusion/exclusion error.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import ResolutionError
from .mesh import TriMesh

__all__ = ["DUNAVANT8", "gauss01", "integrate", "quadrature_points", "segment_gauss"]

_D8 = [
    (1 / 3, 1 / 3, 1 / 3, 0.144315607677787),
]


def _s3(a: float, b: float, w: float) -> list[tuple[float, float, float, float]]:
    return [(a, b, b, w), (b, a, b, w), (b, b, a, w)]


def _s6(a: float, b: float, c: float, w: float) -> list[tuple[float, float, float, float]]:
    return [(a, b, c, w), (a, c, b, w), (b, a, c, w), (b, c, a, w), (c, a, b, w), (c, b, a, w)]


_D8 += _s3(0.081414823414554, 0.459292588292723, 0.095091634267285)
_D8 += _s3(0.658861384496480, 0.170569307751760, 0.103217370534718)
_D8 += _s3(0.898905543365938, 0.050547228317031, 0.032458497623198)
_D8 += _s6(0.008394777409958, 0.263112829634638, 0.728492392955404, 0.027230314174435)
_D8_ARR = np.array(_D8)
#: barycentric points (16, 3) and weights summing to one
DUNAVANT8 = (_D8_ARR[:, :3] / _D8_ARR[:, :3].sum(axis=1, keepdims=True), _D8_ARR[:, 3] / _D8_ARR[:, 3].sum())


def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def segment_gauss(a: np.ndarray, b: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (m, n) and weights (m, n) of Gauss rules on intervals ``[a, b]``."""
    x, w = gauss01(n)
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    return a + (b - a) * x[None], (b - a) * w[None]


def quadrature_points(mesh: TriMesh, tris: np.ndarray | None = None, rule=DUNAVANT8) -> tuple[np.ndarray, np.ndarray]:
    """Physical quadrature points (T, q, 2) and weights (T, q)."""
    bary, w = rule
    v = mesh.vertices if tris is None else mesh.vertices[tris]
    area = mesh.areas if tris is None else mesh.areas[tris]
    pts = np.einsum("qk,tkd->tqd", bary, v)
    return pts, area[:, None] * w[None, :]


def _point_triangle_distance(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Distance from points p (T, 2) to triangles v (T, 3, 2)."""
    d = np.full(len(p), np.inf)
    for k in range(3):
        a = v[:, k]
        b = v[:, (k + 1) % 3]
        ab = b - a
        t = np.clip(np.sum((p - a) * ab, axis=1) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        d = np.minimum(d, np.linalg.norm(a + t[:, None] * ab - p, axis=1))
    inside = np.ones(len(p), dtype=bool)
    sgn = None
    for k in range(3):
        a = v[:, k]
        b = v[:, (k + 1) % 3]
        c = (b[:, 0] - a[:, 0]) * (p[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[:, 0] - a[:, 0])
        s = np.sign(c)
        if sgn is None:
            sgn = s
        inside &= (s == sgn) | (s == 0)
    d[inside] = 0.0
    return d


def _fan_nodes(
    p: np.ndarray, A: np.ndarray, B: np.ndarray, lo: float, hi: float,
    breaks: Sequence[float], n_a: int, n_r: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Polar quadrature on sub-triangles ``(p, A, B)`` restricted to ``lo <= r <= hi``.

    Returns points (F, K, 2) and signed weights (F, K).
    """
    a = A - p
    b = B - p
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = np.sum(a * b, axis=1)
    sign = np.sign(cross)
    swap = cross < 0
    a2 = np.where(swap[:, None], b, a)
    b2 = np.where(swap[:, None], a, b)
    span = np.abs(np.arctan2(cross, dot))
    alpha0 = np.arctan2(a2[:, 1], a2[:, 0])
    e = b2 - a2
    elen = np.linalg.norm(e, axis=1)
    e = e / elen[:, None]
    foot = a2 - np.sum(a2 * e, axis=1)[:, None] * e
    D = np.linalg.norm(foot, axis=1)
    alpha_n = np.arctan2(foot[:, 1], foot[:, 0])

    edges = sorted({lo, hi, *[x for x in breaks if lo < x < hi]})
    finite = [x for x in edges if 0 < x < math.inf]
    # angular breakpoints where r_max(alpha) crosses a radial edge
    cuts = [np.zeros(len(p)), span.copy()]
    for rb in finite:
        ok = D < rb
        c = np.arccos(np.clip(D / rb, -1.0, 1.0))
        for s_ in (-1.0, 1.0):
            off = np.mod(alpha_n + s_ * c - alpha0, 2.0 * np.pi)
            good = ok & (off > 0) & (off < span)
            cuts.append(np.where(good, off, span))
    cuts = np.sort(np.stack(cuts, axis=1), axis=1)
    xa, wa = gauss01(n_a)
    xr, wr = gauss01(n_r)

    lo_a = cuts[:, :-1]
    hi_a = cuts[:, 1:]
    S = lo_a.shape[1]
    # (F, S, n_a)
    alpha = alpha0[:, None, None] + lo_a[:, :, None] + (hi_a - lo_a)[:, :, None] * xa[None, None, :]
    w_alpha = (hi_a - lo_a)[:, :, None] * wa[None, None, :]
    cosd = np.cos(alpha - alpha_n[:, None, None])
    rmax = np.where(cosd > 1e-300, D[:, None, None] / np.maximum(cosd, 1e-300), np.inf)
    # representative angle at each sub-interval midpoint fixes which radial segments are active
    pts_list, w_list = [], []
    for g in range(len(edges) - 1):
        r0 = edges[g]
        r1 = np.minimum(edges[g + 1], rmax)
        valid = r1 > r0 * (1.0 + 1e-14)
        r1 = np.where(valid, r1, r0 if r0 > 0 else 1.0)
        if r0 > 0:
            l0 = math.log(r0)
            l1 = np.log(np.where(valid, r1, r0))
            t = l0 + (l1 - l0)[..., None] * xr
            r = np.exp(t)
            w = (l1 - l0)[..., None] * wr * r * r
        else:
            r = r1[..., None] * xr
            w = r1[..., None] * wr * r
        w = np.where(valid[..., None], w, 0.0)
        wt = w * w_alpha[..., None] * sign[:, None, None, None]
        ca = np.cos(alpha)[..., None]
        sa = np.sin(alpha)[..., None]
        pts = np.stack([p[:, None, None, None, 0] + r * ca, p[:, None, None, None, 1] + r * sa], axis=-1)
        pts_list.append(pts.reshape(len(p), -1, 2))
        w_list.append(wt.reshape(len(p), -1))
    return np.concatenate(pts_list, axis=1), np.concatenate(w_list, axis=1)


def integrate(
    mesh: TriMesh,
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    *,
    centers: np.ndarray | Sequence[Sequence[float]] = (),
    keep: str = "all",
    radius: float = 0.0,
    breaks: Sequence[float] = (),
    value_shape: tuple[int, ...] = (),
    n_angle: int = 12,
    n_radial: int = 12,
    near_factor: float = 3.0,
    triangles: np.ndarray | None = None,
    chunk: int = 4096,
) -> np.ndarray:
    """Integrate ``func`` over each triangle.

    Parameters
    ----------
    mesh : TriMesh
    func : callable
        ``func(points, tri)`` with points (K, 2) and owning triangle
        indices (K,), returning (K, *value_shape).
    centers : (k, 2) array
        Singular points; triangles near them use polar fan quadrature.
    keep : {"all", "outside", "inside"}
        Restrict the integral to ``|x - p| >= radius`` ("outside") or
        ``|x - p| <= radius`` ("inside") for the nearest center ``p``.
    radius : float
        Excision radius used by ``keep``.
    breaks : sequence of float
        Extra radii where the integrand has a kink.
    triangles : array of int, optional
        Subset of triangles; others get zero.

    Returns
    -------
    (M, *value_shape) array of per-triangle integrals.
    """
    if keep not in ("all", "outside", "inside"):
        raise ValueError(f"keep must be 'all', 'outside' or 'inside', got {keep!r}")
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    M = mesh.n_triangles
    out = np.zeros((M,) + tuple(value_shape))
    tris = np.arange(M) if triangles is None else np.asarray(triangles)
    if len(tris) == 0:
        return out
    if keep != "all" and len(centers) == 0:
        if keep == "inside":
            return out
        keep = "all"

    fan = np.zeros(len(tris), dtype=bool)
    nearest = np.zeros(len(tris), dtype=int)
    skip = np.zeros(len(tris), dtype=bool)
    if len(centers):
        v = mesh.vertices[tris]
        diam = mesh.diameters[tris]
        dist = np.stack([_point_triangle_distance(np.broadcast_to(c, (len(tris), 2)), v) for c in centers], axis=1)
        far = np.stack([np.max(np.linalg.norm(v - c[None, None, :], axis=2), axis=1) for c in centers], axis=1)
        nearest = np.argmin(dist, axis=1)
        idx = np.arange(len(tris))
        d0 = dist[idx, nearest]
        f0 = far[idx, nearest]
        radii = list(breaks) + ([radius] if keep != "all" else [])
        fan = d0 < near_factor * diam
        for rb in radii:
            fan |= (d0 <= rb) & (f0 >= rb)
        if keep != "all" and len(centers) > 1:
            masked = dist.copy()
            masked[idx, nearest] = np.inf
            if np.any(masked.min(axis=1) < radius):
                raise ResolutionError("a triangle meets two excision discs; reduce the radius or refine the mesh")
        if keep == "inside":
            skip = (~fan) & (d0 >= radius)
            skip |= fan & (d0 >= radius)
        elif keep == "outside":
            skip = f0 <= radius

    reg = tris[(~fan) & (~skip)]
    for i in range(0, len(reg), chunk):
        t = reg[i:i + chunk]
        pts, w = quadrature_points(mesh, t)
        q = pts.shape[1]
        vals = np.asarray(func(pts.reshape(-1, 2), np.repeat(t, q)), dtype=float)
        vals = vals.reshape((len(t), q) + tuple(value_shape))
        out[t] = np.einsum("tq,tq...->t...", w, vals)

    fan_t = tris[fan & (~skip)]
    if len(fan_t):
        cidx = nearest[fan & (~skip)]
        lo, hi = 0.0, math.inf
        if keep == "outside":
            lo = radius
        elif keep == "inside":
            hi = radius
        per = max(1, chunk // 8)
        for i in range(0, len(fan_t), per):
            t = fan_t[i:i + per]
            pc = centers[cidx[i:i + per]]
            v = mesh.vertices[t]
            acc = np.zeros((len(t),) + tuple(value_shape))
            for k in range(3):
                A = v[:, k]
                B = v[:, (k + 1) % 3]
                a = A - pc
                b = B - pc
                cr = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
                scale = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
                ok = np.abs(cr) > 1e-13 * scale
                if not np.any(ok):
                    continue
                pts, w = _fan_nodes(pc[ok], A[ok], B[ok], lo, hi, breaks, n_angle, n_radial)
                K = pts.shape[1]
                nz = w != 0.0
                vals = np.zeros((len(pts), K) + tuple(value_shape))
                owner = np.repeat(t[ok], K).reshape(len(pts), K)
                if np.any(nz):
                    vals[nz] = np.asarray(func(pts[nz], owner[nz]), dtype=float).reshape((-1,) + tuple(value_shape))
                acc[ok] += np.einsum("fk,fk...->f...", w, vals)
            out[t] = acc
    return out
