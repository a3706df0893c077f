"""Boundary curves, collar coordinates and planar domains.

A boundary component is stored as ``n`` samples placed at uniform
arclength along a closed curve.  The frame follows the convention used
throughout the package:

* ``tau`` is the unit tangent, oriented counterclockwise on the outer
  curve and clockwise on every hole, so the domain always lies to the
  left of ``tau``;
* ``nu = tau`` rotated by +pi/2 is the inward normal and ``n = -nu`` the
  outward normal;
* ``kappa`` is the signed curvature with ``tau' = kappa nu``, so that the
  total curvature is ``+2 pi`` on the outer curve and ``-2 pi`` on holes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, splev, splprep
from scipy.spatial import cKDTree
from shapely.geometry import LinearRing, Point, Polygon

from .errors import (
    CollarRangeError,
    DomainError,
    GeometryError,
    InputError,
    MeshError,
    ParamError,
    ResolutionError,
)

if TYPE_CHECKING:
    from .mesh import TriMesh

__all__ = [
    "BoundaryComponent",
    "Domain",
    "build_component",
    "build_domain",
    "collar_inverse",
    "collar_jacobian",
    "collar_map",
    "euler_characteristic",
    "load_domain_description",
    "mesh_domain",
    "perp",
]

TWO_PI = 2.0 * math.pi


def perp(v: np.ndarray) -> np.ndarray:
    """Rotate vectors (last axis of length 2) by +pi/2."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


# ---------------------------------------------------------------------------
# parametric curve descriptors
# ---------------------------------------------------------------------------

Curve = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def _circle(center: Sequence[float], radius: float) -> Curve:
    cx, cy = map(float, center)
    r = float(radius)
    if not r > 0:
        raise GeometryError(f"circle radius must be positive, got {radius}")

    def curve(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c, s = np.cos(t), np.sin(t)
        return np.c_[cx + r * c, cy + r * s], np.c_[-r * s, r * c]

    return curve


def _ellipse(center: Sequence[float], a: float, b: float, angle: float = 0.0) -> Curve:
    cx, cy = map(float, center)
    a, b = float(a), float(b)
    if not (a > 0 and b > 0):
        raise GeometryError(f"ellipse semi-axes must be positive, got {a}, {b}")
    ca, sa = math.cos(angle), math.sin(angle)

    def curve(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c, s = np.cos(t), np.sin(t)
        x, y = a * c, b * s
        dx, dy = -a * s, b * c
        pts = np.c_[cx + ca * x - sa * y, cy + sa * x + ca * y]
        der = np.c_[ca * dx - sa * dy, sa * dx + ca * dy]
        return pts, der

    return curve


def _polyline(points: Sequence[Sequence[float]], smoothing: float = 0.0) -> Curve:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise GeometryError("polyline needs at least 4 points of the form [x, y]")
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    closed = np.vstack([pts, pts[:1]])
    if np.any(np.linalg.norm(np.diff(closed, axis=0), axis=1) == 0.0):
        raise GeometryError("polyline contains repeated consecutive points")
    tck, _ = splprep([closed[:, 0], closed[:, 1]], s=float(smoothing), per=1, k=3)

    def curve(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = np.mod(t, TWO_PI) / TWO_PI
        x, y = splev(u, tck)
        dx, dy = splev(u, tck, der=1)
        return np.c_[x, y], np.c_[dx, dy] / TWO_PI

    return curve


def _curve_from_description(desc: Mapping[str, Any]) -> Curve:
    kind = desc.get("kind")
    try:
        if kind == "circle":
            return _circle(desc.get("center", (0.0, 0.0)), desc["radius"])
        if kind == "ellipse":
            if "axes" in desc:
                a, b = desc["axes"]
            else:
                a, b = desc["a"], desc["b"]
            return _ellipse(desc.get("center", (0.0, 0.0)), a, b, desc.get("angle", 0.0))
        if kind == "polyline":
            return _polyline(desc["points"], desc.get("smoothing", 0.0))
    except KeyError as exc:
        raise GeometryError(f"curve descriptor {kind!r} is missing key {exc}") from None
    raise GeometryError(f"unknown curve kind {kind!r}")


def _arclength_resample(curve: Curve, n: int) -> tuple[np.ndarray, float]:
    """Return ``n`` points at uniform arclength, starting at parameter 0.

    The speed ``|gamma'(t)|`` is periodic, so its antiderivative is obtained
    spectrally from an FFT; the target parameters are then found by Newton
    iteration on ``s(t) = s_k``.
    """
    m = 4096
    while True:
        t = np.arange(m) * (TWO_PI / m)
        speed = np.linalg.norm(curve(t)[1], axis=1)
        coef = np.fft.rfft(speed) / m
        tail = np.abs(coef[int(0.8 * len(coef)):]).max()
        if tail < 1e-13 * abs(coef[0]) or m >= 2**17:
            break
        m *= 2
    k = np.arange(1, len(coef))
    ck = coef[1:]
    if m % 2 == 0:
        ck = ck.copy()
        ck[-1] *= 0.5
    keep = np.abs(ck) > 1e-17 * abs(coef[0])
    k, ck = k[keep], ck[keep]
    mean_speed = coef[0].real
    length = TWO_PI * mean_speed

    def s_of_t(tt: np.ndarray) -> np.ndarray:
        e = np.exp(1j * np.outer(tt, k))
        return mean_speed * tt + 2.0 * np.real((e - 1.0) @ (ck / (1j * k)))

    targets = np.arange(n) * (length / n)
    # initial guess from the cumulative trapezoid rule
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (speed + np.roll(speed, -1)) * (TWO_PI / m))])
    tgrid = np.arange(m + 1) * (TWO_PI / m)
    tt = np.interp(targets, cum * (length / cum[-1]), tgrid)
    for _ in range(8):
        chunk = 512
        res = np.empty_like(tt)
        for i in range(0, len(tt), chunk):
            res[i:i + chunk] = s_of_t(tt[i:i + chunk])
        res -= targets
        sp = np.linalg.norm(curve(tt)[1], axis=1)
        step = res / sp
        tt -= step
        if np.max(np.abs(step)) < 1e-14:
            break
    return curve(tt)[0], float(length)


# ---------------------------------------------------------------------------
# boundary components
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryComponent:
    """One closed boundary curve sampled at uniform arclength.

    Parameters
    ----------
    samples : (n, 2) array
        Curve points; sample ``k`` sits at arclength ``k * L / n``.  The
        closing point is implicit (see :attr:`closed_samples`).
    length : float
        Total arclength ``L``.
    tangent, normal : (n, 2) arrays
        Unit tangent ``tau`` and inward normal ``nu = tau^perp``.
    curvature : (n,) array
        Signed curvature, ``tau' = kappa nu``.
    orientation : {"outer", "inner"}
    """

    samples: np.ndarray
    length: float
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    orientation: str
    descriptor: Mapping[str, Any] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.orientation not in ("outer", "inner"):
            raise GeometryError(f"orientation must be 'outer' or 'inner', got {self.orientation!r}")
        for name in ("samples", "tangent", "normal", "curvature"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def arclengths(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @property
    def closed_samples(self) -> np.ndarray:
        return np.vstack([self.samples, self.samples[:1]])

    @property
    def outward_normal(self) -> np.ndarray:
        return -self.normal

    @property
    def total_curvature(self) -> float:
        return float(np.sum(self.curvature) * self.spacing)

    @property
    def natural_collar(self) -> float:
        """Collar radius allowed by curvature alone, ``0.5 / max|kappa|``."""
        kmax = float(np.max(np.abs(self.curvature)))
        return 0.5 / kmax if kmax > 0 else math.inf

    @cached_property
    def _position_spline(self) -> CubicSpline:
        s = np.arange(self.n + 1) * self.spacing
        return CubicSpline(s, self.closed_samples, bc_type="periodic")

    @cached_property
    def _curvature_spline(self) -> CubicSpline:
        s = np.arange(self.n + 1) * self.spacing
        k = np.append(self.curvature, self.curvature[0])
        return CubicSpline(s, k, bc_type="periodic")

    def wrap(self, s: np.ndarray | float) -> np.ndarray:
        return np.mod(np.asarray(s, dtype=float), self.length)

    def point(self, s: np.ndarray | float) -> np.ndarray:
        """Curve point at arclength ``s`` (periodic cubic spline)."""
        return self._position_spline(self.wrap(s))

    def velocity(self, s: np.ndarray | float) -> np.ndarray:
        """Derivative of :meth:`point`; unit length up to interpolation error."""
        return self._position_spline(self.wrap(s), 1)

    def tangent_at(self, s: np.ndarray | float) -> np.ndarray:
        v = self.velocity(s)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def normal_at(self, s: np.ndarray | float) -> np.ndarray:
        return perp(self.tangent_at(s))

    def curvature_at(self, s: np.ndarray | float) -> np.ndarray:
        return self._curvature_spline(self.wrap(s))

    def polygon_ring(self) -> LinearRing:
        return LinearRing(self.samples)


def build_component(
    desc: Mapping[str, Any] | Curve,
    n: int = 1024,
    orientation: str = "outer",
) -> BoundaryComponent:
    """Resample a closed curve at uniform arclength and attach its frame.

    Parameters
    ----------
    desc : mapping or callable
        Either a descriptor (``{"kind": "circle", "center": [x, y],
        "radius": r}``, ``{"kind": "ellipse", "center": ..., "a": ...,
        "b": ..., "angle": ...}`` or ``{"kind": "polyline", "points": [...],
        "smoothing": s}``) or a callable ``t -> (gamma(t), gamma'(t))`` on
        ``[0, 2 pi)``.
    n : int
        Number of samples, at least 32.
    orientation : {"outer", "inner"}
        Outer curves are traversed counterclockwise, holes clockwise.  The
        parametrization is reversed when needed; the starting point is kept.

    Raises
    ------
    GeometryError
        Self-intersecting or degenerate curve.
    ResolutionError
        ``max|kappa| * spacing > 0.5``.
    """
    if int(n) != n or n < 32:
        raise ParamError(f"sample count must be an integer >= 32, got {n}")
    n = int(n)
    if orientation not in ("outer", "inner"):
        raise GeometryError(f"orientation must be 'outer' or 'inner', got {orientation!r}")
    curve = desc if callable(desc) else _curve_from_description(desc)

    pts, length = _arclength_resample(curve, n)
    if not np.all(np.isfinite(pts)) or length <= 0:
        raise GeometryError("curve evaluation produced non-finite points")
    ring = LinearRing(pts)
    if not ring.is_simple:
        raise GeometryError("boundary curve is self-intersecting")
    signed_area = 0.5 * np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
    if signed_area == 0:
        raise GeometryError("boundary curve encloses no area")
    want_ccw = orientation == "outer"
    if (signed_area > 0) != want_ccw:
        pts = np.vstack([pts[:1], pts[:0:-1]])

    ds = length / n
    fwd = np.roll(pts, -1, axis=0) - pts
    bwd = pts - np.roll(pts, 1, axis=0)
    chord = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
    tangent = chord / np.linalg.norm(chord, axis=1, keepdims=True)
    normal = perp(tangent)
    turn = np.arctan2(bwd[:, 0] * fwd[:, 1] - bwd[:, 1] * fwd[:, 0], np.sum(bwd * fwd, axis=1))
    curvature = turn / ds
    if np.max(np.abs(curvature)) * ds > 0.5:
        raise ResolutionError(
            f"{n} samples cannot resolve the curvature: max|kappa|*spacing = "
            f"{np.max(np.abs(curvature)) * ds:.3g} > 0.5"
        )
    descriptor = dict(desc) if isinstance(desc, Mapping) else None
    return BoundaryComponent(pts, length, tangent, normal, curvature, orientation, descriptor)


# ---------------------------------------------------------------------------
# collar coordinates
# ---------------------------------------------------------------------------


def collar_map(
    c: BoundaryComponent, y1: np.ndarray | float, y2: np.ndarray | float,
    collar_radius: float | None = None,
) -> np.ndarray:
    """Map collar coordinates to the plane: ``gamma(y1) + y2 nu(y1)``.

    ``collar_radius`` defaults to :attr:`BoundaryComponent.natural_collar`.
    """
    r = c.natural_collar if collar_radius is None else collar_radius
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if np.any(np.abs(y2) >= r):
        raise CollarRangeError(f"|y2| = {np.max(np.abs(y2)):.4g} is not below the collar radius {r:.4g}")
    return c.point(y1) + y2[..., None] * c.normal_at(y1)


def collar_jacobian(c: BoundaryComponent, y1: np.ndarray | float, y2: np.ndarray | float) -> np.ndarray:
    """Jacobian determinant ``1 - y2 kappa(y1)`` of :func:`collar_map`."""
    return 1.0 - np.asarray(y2, dtype=float) * c.curvature_at(y1)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


def _default_collar(components: Sequence[BoundaryComponent]) -> float:
    kmax = max(float(np.max(np.abs(c.curvature))) for c in components)
    bound = 1.0 / kmax if kmax > 0 else math.inf
    if len(components) > 1:
        gap = math.inf
        for i in range(len(components)):
            for j in range(i + 1, len(components)):
                gap = min(gap, components[i].polygon_ring().distance(components[j].polygon_ring()))
        bound = min(bound, 0.5 * gap)
    return 0.5 * bound


@dataclass(frozen=True, eq=False)
class Domain:
    """Outer boundary plus ``b`` holes, optionally with a triangulation.

    Parameters
    ----------
    components : tuple of BoundaryComponent
        Index 0 is the outer curve, indices ``1..b`` the holes.
    collar_radius : float, optional
        Width ``r1`` of the collar neighbourhood.  Defaults to
        ``0.5 * min(1 / max|kappa|, half the minimal component distance)``.
    mesh : TriMesh, optional
    """

    components: tuple[BoundaryComponent, ...]
    collar_radius: float | None = None
    mesh: "TriMesh | None" = field(default=None, repr=False)

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps or comps[0].orientation != "outer":
            raise GeometryError("component 0 must be the outer curve")
        if any(c.orientation != "inner" for c in comps[1:]):
            raise GeometryError("exactly one outer component is allowed")
        outer = Polygon(comps[0].samples)
        holes = [Polygon(c.samples) for c in comps[1:]]
        for i, hp in enumerate(holes, start=1):
            if not outer.contains(hp) or outer.exterior.distance(hp) <= 0:
                raise GeometryError(f"hole {i} is not strictly inside the outer curve")
            for j in range(i + 1, len(holes) + 1):
                if hp.intersects(holes[j - 1]):
                    raise GeometryError(f"holes {i} and {j} intersect")
        r = _default_collar(comps) if self.collar_radius is None else float(self.collar_radius)
        if not r > 0:
            raise ParamError(f"collar radius must be positive, got {r}")
        kmax = max(float(np.max(np.abs(c.curvature))) for c in comps)
        if r * kmax >= 1.0:
            raise ParamError(f"collar radius {r:.4g} violates 1 - y2*kappa > 0 (max|kappa| = {kmax:.4g})")
        object.__setattr__(self, "collar_radius", r)

    @property
    def b(self) -> int:
        return len(self.components) - 1

    @property
    def outer(self) -> BoundaryComponent:
        return self.components[0]

    @property
    def holes(self) -> tuple[BoundaryComponent, ...]:
        return self.components[1:]

    @cached_property
    def polygon(self) -> Polygon:
        return Polygon(self.outer.samples, [h.samples for h in self.holes])

    @property
    def area(self) -> float:
        return float(self.polygon.area)

    @property
    def diameter(self) -> float:
        pts = self.outer.samples
        from scipy.spatial import ConvexHull

        hull = pts[ConvexHull(pts).vertices]
        d = hull[:, None, :] - hull[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))

    @property
    def euler_characteristic(self) -> int:
        return euler_characteristic(self)

    def with_mesh(self, mesh: "TriMesh") -> "Domain":
        return Domain(self.components, self.collar_radius, mesh)

    def hole_points(self) -> np.ndarray:
        """A point strictly inside each hole."""
        return np.array([Polygon(h.samples).representative_point().coords[0] for h in self.holes]).reshape(-1, 2)

    def collar_map(self, i: int, y1, y2) -> np.ndarray:
        return collar_map(self.components[i], y1, y2, self.collar_radius)

    @cached_property
    def _sample_tree(self) -> tuple[cKDTree, np.ndarray, np.ndarray]:
        pts = np.vstack([c.samples for c in self.components])
        comp = np.concatenate([np.full(c.n, i) for i, c in enumerate(self.components)])
        s = np.concatenate([c.arclengths for c in self.components])
        return cKDTree(pts), comp, s

    def project(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nearest boundary point of each row of ``x``.

        Returns
        -------
        comp : (m,) int
        s : (m,) float
            Arclength of the foot point.
        y2 : (m,) float
            Signed distance along the inward normal (positive inside).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        tree, comp_of, s_of = self._sample_tree
        _, idx = tree.query(x, k=min(4, len(comp_of)))
        idx = np.atleast_2d(idx)
        best_d = np.full(len(x), np.inf)
        best_c = np.zeros(len(x), dtype=int)
        best_s = np.zeros(len(x))
        for col in range(idx.shape[1]):
            cand_c = comp_of[idx[:, col]]
            cand_s = s_of[idx[:, col]].copy()
            for ci in np.unique(cand_c):
                sel = cand_c == ci
                c = self.components[ci]
                s = cand_s[sel]
                xs = x[sel]
                for _ in range(30):
                    g = c._position_spline(c.wrap(s))
                    d1 = c._position_spline(c.wrap(s), 1)
                    d2 = c._position_spline(c.wrap(s), 2)
                    r = g - xs
                    f1 = np.sum(r * d1, axis=1)
                    f2 = np.sum(d1 * d1, axis=1) + np.sum(r * d2, axis=1)
                    step = f1 / np.where(f2 > 0.1, f2, 1.0)
                    step = np.clip(step, -c.spacing, c.spacing)
                    s = s - step
                    if np.max(np.abs(step)) < 1e-14 * max(1.0, c.length):
                        break
                dist = np.linalg.norm(c.point(s) - xs, axis=1)
                better = dist < best_d[sel]
                where = np.flatnonzero(sel)[better]
                best_d[where] = dist[better]
                best_c[where] = ci
                sw = c.wrap(s[better])
                best_s[where] = np.where(c.length - sw < 1e-12 * c.length, 0.0, sw)
        y2 = np.empty(len(x))
        for ci in np.unique(best_c):
            sel = best_c == ci
            c = self.components[ci]
            y2[sel] = np.sum((x[sel] - c.point(best_s[sel])) * c.normal_at(best_s[sel]), axis=1)
        return best_c, best_s, y2

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Membership in the closed domain, with a small tolerance."""
        _, _, y2 = self.project(x)
        return y2 >= -tol


def euler_characteristic(d: Domain) -> int:
    """Return ``1 - b`` after checking it against the total curvature.

    Raises
    ------
    GeometryError
        If ``(1 / 2 pi) * sum of integrals of kappa`` differs from ``1 - b``
        by more than 1e-3, which signals a wrong orientation.
    """
    chi = 1 - d.b
    total = sum(c.total_curvature for c in d.components) / TWO_PI
    if abs(total - chi) > 1e-3:
        raise GeometryError(f"total curvature / 2pi = {total:.6f} does not match 1 - b = {chi}")
    return chi


def collar_inverse(d: Domain, x: Sequence[float]) -> tuple[int, float, float] | None:
    """Collar coordinates ``(component, y1, y2)`` of ``x``, or ``None``.

    ``None`` is returned when ``x`` is at distance ``>= collar_radius`` from
    the boundary.

    Raises
    ------
    DomainError
        If ``x`` lies outside the closed domain.
    """
    x = np.asarray(x, dtype=float).reshape(1, 2)
    comp, s, y2 = d.project(x)
    tol = 1e-9 + max(c.spacing**2 * float(np.max(np.abs(c.curvature))) for c in d.components)
    if y2[0] < -tol:
        raise DomainError(f"point {x[0].tolist()} lies outside the domain")
    if y2[0] >= d.collar_radius:
        return None
    return int(comp[0]), float(s[0]), float(max(y2[0], 0.0))


def mesh_domain(
    components: Sequence[BoundaryComponent] | Domain,
    h: float,
    *,
    collar_radius: float | None = None,
    **options: Any,
) -> Domain:
    """Triangulate the region bounded by ``components``.

    Parameters
    ----------
    components : sequence of BoundaryComponent or Domain
    h : float
        Target edge length in the bulk.
    collar_radius : float, optional
        Override of the default collar radius.
    **options
        Forwarded to :func:`glvortex.mesh.triangulate_domain`
        (refinement points, grading, boundary-layer factor, ...).

    Raises
    ------
    MeshError
        Invalid geometry (for example a hole touching the outer curve) or
        failure of the mesher.
    """
    from .mesh import triangulate_domain

    if isinstance(components, Domain):
        base = components if collar_radius is None else Domain(components.components, collar_radius)
    else:
        try:
            base = Domain(tuple(components), collar_radius)
        except GeometryError as exc:
            raise MeshError(str(exc)) from exc
    mesh = triangulate_domain(base, h, **options)
    return base.with_mesh(mesh)


# ---------------------------------------------------------------------------
# JSON ingestion
# ---------------------------------------------------------------------------


def load_domain_description(source: str | Path | Mapping[str, Any]) -> dict[str, Any]:
    """Read and minimally validate a domain description.

    The document has the form ``{"outer": {...}, "holes": [...], "h": 0.02}``
    with optional ``"n"`` (samples per component) and ``"collar_radius"``.
    """
    if isinstance(source, Mapping):
        doc = dict(source)
    else:
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise InputError(f"domain file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "outer" not in doc:
        raise InputError("domain description must be an object with an 'outer' curve")
    holes = doc.get("holes", [])
    if not isinstance(holes, list):
        raise InputError("'holes' must be a list of curve descriptors")
    for key in ("h", "n", "collar_radius"):
        if key in doc and not isinstance(doc[key], (int, float)):
            raise InputError(f"'{key}' must be a number")
    return doc


def build_domain(
    source: str | Path | Mapping[str, Any],
    *,
    h: float | None = None,
    n: int | None = None,
    mesh: bool = True,
    **mesh_options: Any,
) -> Domain:
    """Build a :class:`Domain` (meshed unless ``mesh=False``) from a description."""
    doc = load_domain_description(source)
    n = int(n if n is not None else doc.get("n", 1024))
    comps = [build_component(doc["outer"], n, "outer")]
    comps += [build_component(hs, n, "inner") for hs in doc.get("holes", [])]
    radius = doc.get("collar_radius")
    if not mesh:
        return Domain(tuple(comps), radius)
    h = float(h if h is not None else doc.get("h", 0.05))
    if not h > 0:
        raise ParamError(f"mesh size h must be positive, got {h}")
    return mesh_domain(comps, h, collar_radius=radius, **mesh_options)
