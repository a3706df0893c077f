"""Canonical harmonic maps with prescribed interior and boundary vortices.

Sign conventions
----------------
With ``Psi1 = sum d_i log|x - a_i|`` and ``Psi2 = sum d_jk log|x - c_jk|``
the potential ``Psi = Psi1 + Psi2 + H`` satisfies

* ``Laplace(Psi) = 2 pi sum d_i delta_{a_i}`` in the domain,
* ``dPsi/dn = kappa - pi sum d_jk delta_{c_jk}`` on the boundary (outward
  normal ``n``),

and the current of the map is ``jbar = grad^perp Psi``, so that
``jbar . tau = dPsi/dn`` on the boundary and ``curl jbar = Laplace(Psi)``.
The phase of the map is a harmonic conjugate of ``Psi``: near ``a_i`` it
behaves like ``d_i arg(x - a_i)``.

The smooth part ``H`` solves a Neumann problem whose data
``kappa - dPsi1/dn - dPsi2/dn`` is Lipschitz: the Dirac masses at the
boundary vortices are carried exactly by ``Psi2``.  At ``x = c`` on the
same curve the kernel ``(x - c) . n / |x - c|^2`` tends to ``kappa(c) / 2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, depth_first_order

from .errors import CompatibilityError, ConfigError, QuantizationError, ResolutionError
from .fem import solve_dirichlet, solve_pure_neumann
from .field import CellField, Field
from .geometry import Domain, mesh_domain, perp
from .mesh import TriMesh
from .quadrature import gauss01, integrate, quadrature_points
from .vortices import VortexConfiguration, require_valid, separation_radius

__all__ = [
    "BoundaryData",
    "BoundaryPhase",
    "CanonicalMap",
    "HarmonicForms",
    "PotentialDecomposition",
    "boundary_phase",
    "build_canonical_map",
    "harmonic_one_forms",
    "neumann_data",
    "normalize_variant",
    "prepare_domain",
    "rotate_variant",
    "solve_neumann",
]

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# boundary functions
# ---------------------------------------------------------------------------


class BoundaryData:
    """A scalar function on the boundary, ``f(j, s)`` for component ``j``."""

    def __init__(self, domain: Domain, func: Callable[[int, np.ndarray], np.ndarray]):
        self.domain = domain
        self._func = func

    def __call__(self, j: int, s: np.ndarray | float) -> np.ndarray:
        return np.asarray(self._func(j, np.atleast_1d(np.asarray(s, dtype=float))), dtype=float)

    def _component_rule(self, j: int, n_gauss: int) -> tuple[np.ndarray, np.ndarray]:
        c = self.domain.components[j]
        knots = c.arclengths
        return _interval_rule(knots, np.append(knots[1:], c.length), n_gauss)

    def integral(self, j: int | None = None, n_gauss: int = 6) -> float:
        """Composite Gauss quadrature over one component or the whole boundary."""
        comps = range(len(self.domain.components)) if j is None else [j]
        total = 0.0
        for jj in comps:
            s, w = self._component_rule(jj, n_gauss)
            total += float(np.sum(w * self(jj, s)))
        return total

    def l1_norm(self, n_gauss: int = 6) -> float:
        total = 0.0
        for jj in range(len(self.domain.components)):
            s, w = self._component_rule(jj, n_gauss)
            total += float(np.sum(w * np.abs(self(jj, s))))
        return total

    def nodal(self, mesh: TriMesh) -> np.ndarray:
        out = np.zeros(len(mesh.boundary_nodes))
        for j in np.unique(mesh.boundary_component):
            sel = mesh.boundary_component == j
            out[sel] = self(int(j), mesh.boundary_s[sel])
        return out

    def load_vector(self, mesh: TriMesh, n_gauss: int = 6) -> np.ndarray:
        """``b_k = integral of f * hat_k`` along the boundary curves."""
        rhs = np.zeros(mesh.n_nodes)
        pos = {int(n): i for i, n in enumerate(mesh.boundary_nodes)}
        edges = mesh.boundary_edges
        comp = mesh.boundary_edge_component
        for j in np.unique(comp):
            c = self.domain.components[int(j)]
            e = edges[comp == j]
            sa = mesh.boundary_s[[pos[int(k)] for k in e[:, 0]]]
            sb = mesh.boundary_s[[pos[int(k)] for k in e[:, 1]]]
            sb = np.where(sb <= sa, sb + c.length, sb)
            nsub = int(max(1, np.ceil(np.max(sb - sa) / c.spacing)))
            frac = np.linspace(0.0, 1.0, nsub + 1)
            lo = (sa[:, None] + (sb - sa)[:, None] * frac[None, :-1]).ravel()
            hi = (sa[:, None] + (sb - sa)[:, None] * frac[None, 1:]).ravel()
            x, w = gauss01(n_gauss)
            s = lo[:, None] + (hi - lo)[:, None] * x[None]
            ws = (hi - lo)[:, None] * w[None]
            vals = self(int(j), s.ravel()).reshape(s.shape) * ws
            t = (s - np.repeat(sa, nsub)[:, None]) / np.repeat(sb - sa, nsub)[:, None]
            left = np.sum(vals * (1.0 - t), axis=1).reshape(len(e), nsub).sum(axis=1)
            right = np.sum(vals * t, axis=1).reshape(len(e), nsub).sum(axis=1)
            np.add.at(rhs, e[:, 0], left)
            np.add.at(rhs, e[:, 1], right)
        return rhs


def _interval_rule(a: np.ndarray, b: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss01(n)
    s = a[:, None] + (b - a)[:, None] * x[None]
    return s.ravel(), ((b - a)[:, None] * w[None]).ravel()


def _kernel(x: np.ndarray, n_out: np.ndarray, c: np.ndarray) -> np.ndarray:
    r = x - c
    return np.sum(r * n_out, axis=1) / np.sum(r * r, axis=1)


def neumann_data(cfg: VortexConfiguration, d: Domain, *, check: bool = True, tol: float = 1e-6) -> BoundaryData:
    """Lipschitz Neumann data for the smooth part ``H`` of the potential.

    ``g = kappa - sum_i d_i (x - a_i).n/|x - a_i|^2 - sum_jk d_jk (x - c_jk).n/|x - c_jk|^2``,
    where the last kernel is replaced near its own vortex by the expansion
    ``kappa(c)/2 + h kappa'(c)/3`` (``h`` the arclength offset).

    Raises
    ------
    CompatibilityError
        If ``|integral of g| > tol * max(||g||_1, 2 pi)``.
    """
    comps = d.components
    a_pts = cfg.interior_points
    a_deg = cfg.interior_degrees
    bnd = [(v.component, float(comps[v.component].wrap(v.s)), v.degree) for v in cfg.boundary]
    c_pts = [comps[j].point(s) for j, s, _ in bnd]
    kap0 = [float(comps[j].curvature_at(s)) for j, s, _ in bnd]
    dkap0 = [float(comps[j]._curvature_spline(s, 1)) for j, s, _ in bnd]

    def func(j: int, s: np.ndarray) -> np.ndarray:
        comp = comps[j]
        x = comp.point(s)
        n_out = -comp.normal_at(s)
        val = comp.curvature_at(s).astype(float)
        for a, da in zip(a_pts, a_deg):
            val = val - da * _kernel(x, n_out, a)
        for (jc, sc, dc), c, k0, dk0 in zip(bnd, c_pts, kap0, dkap0):
            with np.errstate(divide="ignore", invalid="ignore"):
                ker = _kernel(x, n_out, c)
            if jc == j:
                L = comp.length
                h = np.mod(s - sc + 0.5 * L, L) - 0.5 * L
                near = np.abs(h) < 1e-4 * L
                ker = np.where(near, 0.5 * k0 + h * dk0 / 3.0, ker)
            val = val - dc * ker
        return val

    data = BoundaryData(d, func)
    if check:
        total = data.integral()
        scale = max(data.l1_norm(), TWO_PI)
        if abs(total) > tol * scale:
            raise CompatibilityError(
                f"Neumann data integrate to {total:.6g} (tolerance {tol * scale:.3g}); "
                "the vortex degrees do not balance the Euler characteristic"
            )
    return data


def solve_neumann(d: Domain, data: BoundaryData | Callable[[int, np.ndarray], np.ndarray] | np.ndarray,
                  *, tol: float = 1e-6) -> Field:
    """Zero-mean P1 solution of ``-Laplace H = 0``, ``dH/dn = data``.

    ``data`` is a :class:`BoundaryData`, a callable ``(j, s) -> values`` or
    an array of values at ``mesh.boundary_nodes`` (interpreted as a P1
    function along the boundary).

    Raises
    ------
    CompatibilityError
        If the data do not integrate to zero within ``tol`` relative to
        ``max(||data||_1, 1)``.
    SolverError
        If conjugate gradients fail.
    """
    mesh = _require_mesh(d)
    if isinstance(data, np.ndarray):
        rhs, total, scale = _nodal_load(mesh, data)
    else:
        bd = data if isinstance(data, BoundaryData) else BoundaryData(d, data)
        rhs = bd.load_vector(mesh)
        total = bd.integral()
        scale = bd.l1_norm()
    if abs(total) > tol * max(scale, 1.0):
        raise CompatibilityError(f"Neumann data integrate to {total:.6g}, relative {abs(total) / max(scale, 1.0):.3g}")
    if not np.any(rhs):
        return Field(mesh, np.zeros(mesh.n_nodes))
    return Field(mesh, solve_pure_neumann(mesh, rhs))


def _nodal_load(mesh: TriMesh, values: np.ndarray) -> tuple[np.ndarray, float, float]:
    values = np.asarray(values, dtype=float)
    if values.shape != (len(mesh.boundary_nodes),):
        raise ValueError("nodal Neumann data must have one value per boundary node")
    full = np.zeros(mesh.n_nodes)
    full[mesh.boundary_nodes] = values
    e = mesh.boundary_edges
    length = np.linalg.norm(mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]], axis=1)
    rhs = np.zeros(mesh.n_nodes)
    np.add.at(rhs, e[:, 0], length * (2 * full[e[:, 0]] + full[e[:, 1]]) / 6.0)
    np.add.at(rhs, e[:, 1], length * (full[e[:, 0]] + 2 * full[e[:, 1]]) / 6.0)
    l1 = float(np.sum(length * 0.5 * (np.abs(full[e[:, 0]]) + np.abs(full[e[:, 1]]))))
    return rhs, float(rhs.sum()), l1


def _require_mesh(d: Domain) -> TriMesh:
    if d.mesh is None:
        raise ValueError("the domain has no mesh; build it with mesh_domain or prepare_domain")
    return d.mesh


# ---------------------------------------------------------------------------
# harmonic one-forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HarmonicForms:
    """Hole potentials ``phi_i``, their gradients and an orthonormal basis.

    ``eta_bar = coefficients @ eta`` with a lower-triangular coefficient
    matrix (Gram-Schmidt in hole order).
    """

    phi: tuple[Field, ...]
    eta: tuple[CellField, ...]
    eta_bar: tuple[CellField, ...]
    gram: np.ndarray
    coefficients: np.ndarray

    def __iter__(self) -> Iterator[Any]:
        yield self.phi
        yield self.eta_bar

    @property
    def b(self) -> int:
        return len(self.phi)

    def eta_array(self) -> np.ndarray:
        return np.stack([e.values for e in self.eta]) if self.eta else np.zeros((0, 0, 2))

    def eta_bar_array(self) -> np.ndarray:
        return np.stack([e.values for e in self.eta_bar]) if self.eta_bar else np.zeros((0, 0, 2))


def harmonic_one_forms(d: Domain) -> HarmonicForms:
    """Solve ``phi_i = 1`` on hole ``i``, 0 on the other curves; orthonormalize ``grad phi_i``."""
    mesh = _require_mesh(d)
    b = d.b
    if b == 0:
        return HarmonicForms((), (), (), np.zeros((0, 0)), np.zeros((0, 0)))
    phis = []
    for i in range(1, b + 1):
        vals = (mesh.boundary_component == i).astype(float)
        phis.append(solve_dirichlet(mesh, mesh.boundary_nodes, vals))
    P = np.stack(phis, axis=1)
    gram = P.T @ (mesh.stiffness @ P)
    gram = 0.5 * (gram + gram.T)
    L = np.linalg.cholesky(gram)
    C = np.linalg.inv(L)
    grads = np.stack([mesh.gradient(p) for p in phis])
    bars = np.einsum("ij,jtd->itd", C, grads)
    return HarmonicForms(
        tuple(Field(mesh, p) for p in phis),
        tuple(CellField(mesh, g) for g in grads),
        tuple(CellField(mesh, g) for g in bars),
        gram,
        C,
    )


# ---------------------------------------------------------------------------
# boundary phase
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryPhase:
    """Unit boundary field ``g = exp(i offset(s)) tau(s)`` on one component.

    ``arcs`` lists ``(start, end, offset)`` in traversal order along ``tau``;
    ``end`` may exceed the length (wrap-around).  Crossing a vortex of
    degree ``d`` changes the offset by ``-pi d``.
    """

    component: int
    length: float
    arcs: tuple[tuple[float, float, float], ...]
    jumps: tuple[tuple[float, int], ...]
    closure: float

    @property
    def start(self) -> float:
        return self.arcs[0][0]

    @property
    def base_point(self) -> float:
        """Arclength of the starting point: midpoint of the first arc."""
        a, b, _ = self.arcs[0]
        return math.fmod(0.5 * (a + b), self.length)

    @property
    def cumulative_offsets(self) -> tuple[float, ...]:
        return tuple(a[2] for a in self.arcs[1:]) + (self.closure,)

    def offset_at(self, s: np.ndarray | float) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        shifted = self.start + np.mod(s - self.start, self.length)
        ends = np.array([a[1] for a in self.arcs])
        idx = np.minimum(np.searchsorted(ends, shifted, side="right"), len(self.arcs) - 1)
        return np.array([a[2] for a in self.arcs])[idx]

    def value(self, d: Domain, s: np.ndarray | float) -> np.ndarray:
        tau = d.components[self.component].tangent_at(s)
        off = self.offset_at(s)
        c, sn = np.cos(off), np.sin(off)
        return np.stack([c * tau[..., 0] - sn * tau[..., 1], sn * tau[..., 0] + c * tau[..., 1]], axis=-1)


def boundary_phase(cfg: VortexConfiguration, d: Domain) -> list[BoundaryPhase]:
    """Build ``g_j`` on every component: ``tau`` on the largest vortex-free arc,
    rotated by ``-pi d`` at each boundary vortex met along ``tau``.

    Raises
    ------
    ConfigError
        If the phase does not close up, i.e. a component carries an odd
        total boundary degree.
    """
    out = []
    for j, comp in enumerate(d.components):
        L = comp.length
        vs = sorted((float(comp.wrap(v.s)), v.degree) for v in cfg.boundary if v.component == j)
        total = sum(dg for _, dg in vs)
        closure = -math.pi * total
        if total % 2:
            raise ConfigError(
                f"boundary phase on component {j} does not close: total jump {closure / math.pi:g} pi "
                "is not a multiple of 2 pi"
            )
        if not vs:
            out.append(BoundaryPhase(j, L, ((0.0, L, 0.0),), (), 0.0))
            continue
        m = len(vs)
        gaps = [(vs[(k + 1) % m][0] - vs[k][0]) % L or L for k in range(m)]
        k0 = int(np.argmax(gaps))
        arcs = []
        jumps = []
        offset = 0.0
        start = vs[k0][0]
        pos = start
        for step in range(m):
            k = (k0 + step) % m
            end = pos + gaps[k]
            arcs.append((pos, end, offset))
            nxt = vs[(k + 1) % m]
            jumps.append((nxt[0], nxt[1]))
            offset -= math.pi * nxt[1]
            pos = end
        out.append(BoundaryPhase(j, L, tuple(arcs), tuple(jumps), closure))
    return out


# ---------------------------------------------------------------------------
# canonical map
# ---------------------------------------------------------------------------


def normalize_variant(variant: str) -> str:
    v = str(variant).strip().lower()
    if v in ("t", "tangential", "tangential-zero", "w_t"):
        return "T"
    if v in ("n", "normal", "normal-zero", "w_n"):
        return "N"
    raise ValueError(f"unknown variant {variant!r}; use 'tangential' (T) or 'normal' (N)")


def _arg_increment(p: np.ndarray, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    """Signed angle subtended at ``p`` by segments ``xa -> xb``."""
    ra = xa - p
    rb = xb - p
    return np.arctan2(ra[:, 0] * rb[:, 1] - ra[:, 1] * rb[:, 0], np.sum(ra * rb, axis=1))


def _grad_arg(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    r = x - p
    return perp(r) / np.sum(r * r, axis=1)[:, None]


@dataclass(frozen=True, eq=False)
class PotentialDecomposition:
    """Potential ``Psi = Psi1 + Psi2 + H``, hole phases and fluxes.

    Attributes
    ----------
    H : Field
        Zero-mean harmonic correction.
    conjugate : Field
        Single-valued part ``w`` of the harmonic conjugate of ``H``:
        ``grad^perp H = grad w + sum_i (P_i / 2 pi) grad arg(x - q_i)``.
    periods : (b,) array
        Circulations ``P_i`` of ``grad^perp H`` around each hole.
    hole_points : (b, 2) array
        Points ``q_i`` inside the holes.
    theta : (b,) array
        Hole phases; ``ju = jbar - sum theta_i eta_i``.
    Phi : (b,) array
        Fluxes ``<ju, eta_bar_j>`` by quadrature.
    Phi_identity : (b,) array
        The same fluxes from ``-sum theta_i <eta_i, eta_bar_j>``, exact for P1.
    jbar_eta_bar : (b,) array
        ``<jbar, eta_bar_j>``; zero for an exact decomposition.
    """

    mesh: TriMesh
    interior_points: np.ndarray
    interior_degrees: np.ndarray
    boundary_points: np.ndarray
    boundary_degrees: np.ndarray
    H: Field
    conjugate: Field
    periods: np.ndarray
    hole_points: np.ndarray
    forms: HarmonicForms
    theta: np.ndarray
    Phi: np.ndarray
    Phi_identity: np.ndarray
    jbar_eta_bar: np.ndarray

    @property
    def phi(self) -> tuple[Field, ...]:
        return self.forms.phi

    @property
    def eta_bar(self) -> tuple[CellField, ...]:
        return self.forms.eta_bar

    @property
    def vortex_points(self) -> np.ndarray:
        return np.vstack([self.interior_points, self.boundary_points])

    @property
    def vortex_degrees(self) -> np.ndarray:
        return np.concatenate([self.interior_degrees, self.boundary_degrees])

    def psi1(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        out = np.zeros(len(x))
        with np.errstate(divide="ignore"):
            for p, dg in zip(self.interior_points, self.interior_degrees):
                out += dg * np.log(np.linalg.norm(x - p, axis=1))
        return out

    def psi2(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        out = np.zeros(len(x))
        with np.errstate(divide="ignore"):
            for p, dg in zip(self.boundary_points, self.boundary_degrees):
                out += dg * np.log(np.linalg.norm(x - p, axis=1))
        return out

    def psi(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.psi1(x) + self.psi2(x) + self.H.evaluate(x)

    def singular_current(self, x: np.ndarray) -> np.ndarray:
        """``grad^perp (Psi1 + Psi2)``."""
        x = np.atleast_2d(x)
        out = np.zeros_like(x)
        for p, dg in zip(self.vortex_points, self.vortex_degrees):
            out += dg * _grad_arg(x, p)
        return out

    @property
    def _grad_H(self) -> np.ndarray:
        return self.mesh.gradient(self.H.values)

    def current_bar(self, x: np.ndarray, tri: np.ndarray) -> np.ndarray:
        """``jbar = grad^perp Psi`` at points ``x`` lying in triangles ``tri``."""
        return self.singular_current(x) + perp(self._grad_H[tri])

    def current(self, x: np.ndarray, tri: np.ndarray) -> np.ndarray:
        """Current of the canonical map, ``jbar - sum theta_i eta_i``."""
        out = self.current_bar(x, tri)
        for th, eta in zip(self.theta, self.forms.eta):
            out = out - th * eta.values[tri]
        return out

    @property
    def modified_current_residual(self) -> float:
        """L2 norm of ``ju - jbar - sum Phi_j eta_bar_j``."""
        if len(self.theta) == 0:
            return 0.0
        r = -np.einsum("i,itd->td", self.theta, self.forms.eta_array())
        r -= np.einsum("j,jtd->td", self.Phi, self.forms.eta_bar_array())
        return float(math.sqrt(np.sum(np.sum(r * r, axis=1) * self.mesh.areas)))

    @property
    def flux_energy(self) -> float:
        return 0.5 * float(np.dot(self.Phi, self.Phi))

    def to_dict(self) -> dict[str, Any]:
        psi = self.psi(self.mesh.nodes)
        return {
            "Phi": self.Phi.tolist(),
            "theta": self.theta.tolist(),
            "periods": self.periods.tolist(),
            "jbar_eta_bar": self.jbar_eta_bar.tolist(),
            "psi": [None if not np.isfinite(v) else float(v) for v in psi],
            "x": self.mesh.nodes[:, 0].tolist(),
            "y": self.mesh.nodes[:, 1].tolist(),
        }


@dataclass(frozen=True, eq=False)
class CanonicalMap:
    """Nodal unit field with prescribed vortices and a zero boundary part.

    ``variant`` is ``"N"`` (zero normal part, ``u`` tangent to the boundary)
    or ``"T"`` (zero tangential part, ``u`` normal to the boundary).
    Values at the vortex nodes are set to zero; values at the other
    boundary nodes are the exact boundary datum.  The harmonic extension's
    own boundary mismatch is kept in ``diagnostics["boundary_residual"]``.
    """

    field: Field
    variant: str
    decomposition: PotentialDecomposition
    config: VortexConfiguration
    domain: Domain
    singular_nodes: np.ndarray
    phase_offset: float
    rotation: int = 0
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def mesh(self) -> TriMesh:
        return self.field.mesh

    def phase(self, x: np.ndarray) -> np.ndarray:
        """Phase of the zero-normal-part map at arbitrary points (mod 2 pi)."""
        dec = self.decomposition
        x = np.atleast_2d(x)
        ph = np.full(len(x), self.phase_offset)
        for p, dg in zip(dec.vortex_points, dec.vortex_degrees):
            r = x - p
            ph += dg * np.arctan2(r[:, 1], r[:, 0])
        for q, P in zip(dec.hole_points, dec.periods):
            r = x - q
            ph += round(P / TWO_PI) * np.arctan2(r[:, 1], r[:, 0])
        ph += dec.conjugate.evaluate(x)
        for th, phi in zip(dec.theta, dec.forms.phi):
            ph -= th * phi.evaluate(x)
        return ph + self.rotation * 0.5 * math.pi

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Unit vectors at arbitrary points, singular parts evaluated exactly."""
        ph = self.phase(x)
        return np.stack([np.cos(ph), np.sin(ph)], axis=-1)

    def current(self, x: np.ndarray, tri: np.ndarray) -> np.ndarray:
        return self.decomposition.current(x, tri)

    def to_csv(self, path: str | Path) -> None:
        rows = np.c_[self.mesh.nodes, self.values]
        np.savetxt(path, rows, delimiter=",", header="x,y,u1,u2", comments="", fmt="%.12g")


def prepare_domain(
    d: Domain, cfg: VortexConfiguration, h: float, *, core_size: float | None = None,
    core_radius: float = 0.0, grading: float = 0.25, **options: Any,
) -> Domain:
    """Mesh ``d`` with nodes at every vortex and local refinement around them."""
    return mesh_domain(
        d.components, h, collar_radius=d.collar_radius,
        points=cfg.interior_points.tolist(),
        boundary_points=[(v.component, v.s) for v in cfg.boundary],
        core_size=core_size if core_size is not None else h / 5.0,
        core_radius=core_radius, grading=grading, **options,
    )


def _vortex_nodes(mesh: TriMesh, pts: np.ndarray) -> np.ndarray:
    if len(pts) == 0:
        return np.zeros(0, dtype=np.int64)
    dist, idx = mesh._node_tree.query(pts)
    if np.any(dist > 1e-9):
        raise ResolutionError(
            "the mesh has no node at some vortex position; build it with prepare_domain(domain, cfg, h)"
        )
    return np.asarray(idx, dtype=np.int64)


def _edge_increment(dec_pts, dec_deg, hole_pts, periods, w, nodes, a, b) -> np.ndarray:
    xa, xb = nodes[a], nodes[b]
    inc = w[b] - w[a]
    for p, dg in zip(dec_pts, dec_deg):
        inc = inc + dg * _arg_increment(p, xa, xb)
    for q, P in zip(hole_pts, periods):
        inc = inc + (P / TWO_PI) * _arg_increment(q, xa, xb)
    return inc


def build_canonical_map(
    cfg: VortexConfiguration,
    d: Domain,
    variant: str = "T",
    *,
    theta_lift: str = "energy",
    tree: str = "bfs",
    root: int | None = None,
) -> CanonicalMap:
    """Construct the canonical harmonic map for ``cfg`` on the meshed domain ``d``.

    Parameters
    ----------
    cfg : VortexConfiguration
    d : Domain
        Must carry a mesh with nodes at all vortices (see :func:`prepare_domain`).
    variant : {"T", "N"}
        ``"T"``: zero tangential part (``u . tau = 0``); ``"N"``: zero
        normal part (``u . n = 0``).
    theta_lift : {"energy", "principal"}
        Hole phases are determined modulo ``2 pi``.  ``"energy"`` picks the
        representative that minimizes ``|sum theta_i eta_i|``;
        ``"principal"`` uses ``[0, 2 pi)``.
    tree : {"bfs", "dfs"}
        Spanning tree used for phase integration.
    root : int, optional
        Outer-boundary node used as the integration root; defaults to the
        one closest to the starting point of ``g_0``.

    Raises
    ------
    ConfigError
        Inadmissible configuration.
    ResolutionError
        Mesh lacks vortex nodes or is coarser than a quarter of the
        separation radius near the vortices.
    QuantizationError
        A loop circulation deviates from a multiple of ``2 pi`` by more than
        ``1e-3 * 2 pi``.
    """
    variant = normalize_variant(variant)
    if theta_lift not in ("energy", "principal"):
        raise ValueError("theta_lift must be 'energy' or 'principal'")
    require_valid(cfg, d)
    mesh = _require_mesh(d)
    a_pts = cfg.interior_points
    c_pts = cfg.boundary_points(d)
    vpts = np.vstack([a_pts, c_pts])
    vdeg = cfg.all_degrees()
    sing = _vortex_nodes(mesh, vpts)
    if len(vpts):
        sep = separation_radius(cfg, d)
        loc = mesh.local_size(vpts, 0.5 * sep)
        if np.max(loc) > sep / 4.0 + 1e-12:
            raise ResolutionError(
                f"local mesh size {np.max(loc):.3g} exceeds a quarter of the separation radius {sep:.3g}"
            )

    data = neumann_data(cfg, d)
    H = solve_neumann(d, data)
    forms = harmonic_one_forms(d)
    b = d.b
    hole_pts = d.hole_points()
    periods = np.array([-data.integral(i) for i in range(1, b + 1)])

    # single-valued part of the conjugate of H, by least squares
    gH = mesh.gradient(H.values)
    F = perp(gH) * mesh.areas[:, None]
    if b:
        qp, qw = quadrature_points(mesh)
        for q, P in zip(hole_pts, periods):
            g = _grad_arg(qp.reshape(-1, 2), q).reshape(qp.shape)
            F -= (P / TWO_PI) * np.einsum("tq,tqd->td", qw, g)
    rhs = np.zeros(mesh.n_nodes)
    np.add.at(rhs, mesh.triangles.ravel(), np.einsum("td,tkd->tk", F, mesh.shape_gradients).ravel())
    w = solve_pure_neumann(mesh, rhs) if np.any(rhs) else np.zeros(mesh.n_nodes)

    # spanning-tree integration of the edge increments
    keep = np.ones(mesh.n_nodes, dtype=bool)
    keep[sing] = False
    e = mesh.edges
    e = e[keep[e[:, 0]] & keep[e[:, 1]]]
    graph = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(mesh.n_nodes,) * 2).tocsr()
    phases = boundary_phase(cfg, d)
    g0 = phases[0]
    if root is None:
        bn, bs = mesh.component_nodes(0)
        ok = keep[bn]
        target = d.outer.point(g0.base_point)
        cand = bn[ok]
        root = int(cand[np.argmin(np.linalg.norm(mesh.nodes[cand] - target, axis=1))])
    elif root not in set(mesh.component_nodes(0)[0].tolist()) or not keep[root]:
        raise ValueError(f"root {root} is not a regular node of the outer boundary")
    if tree == "bfs":
        order, pred = breadth_first_order(graph, root, directed=False, return_predecessors=True)
    elif tree == "dfs":
        order, pred = depth_first_order(graph, root, directed=False, return_predecessors=True)
    else:
        raise ValueError("tree must be 'bfs' or 'dfs'")
    if len(order) != int(keep.sum()):
        raise ResolutionError("mesh graph without vortex nodes is disconnected")
    child = order[1:]
    parent = pred[child]
    inc = _edge_increment(vpts, vdeg, hole_pts, periods, w, mesh.nodes, parent, child)
    inc_of = np.zeros(mesh.n_nodes)
    inc_of[child] = inc
    phase = np.full(mesh.n_nodes, np.nan)
    ri = _root_index(mesh, root)
    g_root = g0.value(d, mesh.boundary_s[ri])
    phase[root] = math.atan2(g_root[1], g_root[0])
    for v, p in zip(child.tolist(), parent.tolist()):
        phase[v] = phase[p] + inc_of[v]
    tree_pairs = set(zip(np.minimum(parent, child).tolist(), np.maximum(parent, child).tolist()))
    is_tree = np.array([(int(x), int(y)) in tree_pairs for x, y in e], dtype=bool)
    off = e[~is_tree]
    if len(off):
        defect = phase[off[:, 0]] + _edge_increment(vpts, vdeg, hole_pts, periods, w, mesh.nodes, off[:, 0], off[:, 1]) - phase[off[:, 1]]
        q = defect / TWO_PI
        quant = float(np.max(np.abs(q - np.round(q))))
    else:
        quant = 0.0
    if quant > 1e-3:
        raise QuantizationError(f"loop circulation defect {quant:.3e} (in units of 2 pi) exceeds 1e-3")

    # hole phases: misalignment between the trace and g_i
    theta_raw = np.zeros(b)
    spread = np.zeros(b)
    for i in range(1, b + 1):
        bn, bs = mesh.component_nodes(i)
        ok = keep[bn]
        bn, bs = bn[ok], bs[ok]
        g = phases[i].value(d, bs)
        rel = phase[bn] - np.arctan2(g[:, 1], g[:, 0])
        z = np.exp(1j * rel)
        theta_raw[i - 1] = float(np.angle(z.mean()))
        spread[i - 1] = float(np.max(np.abs(np.angle(z * np.exp(-1j * theta_raw[i - 1])))))
    theta = _lift_theta(theta_raw, forms.gram, theta_lift)

    phiN = phase.copy()
    for th, phi in zip(theta, forms.phi):
        phiN = phiN - th * phi.values
    vals = np.stack([np.cos(phiN), np.sin(phiN)], axis=1)
    # the trace equals g_j exactly in the continuum; impose it at the nodes
    raw_bc = 0.0
    for j in range(len(d.components)):
        bn, bs = mesh.component_nodes(j)
        ok = keep[bn]
        bn, bs = bn[ok], bs[ok]
        n_out = -d.components[j].normal_at(bs)
        raw_bc = max(raw_bc, float(np.max(np.abs(np.sum(vals[bn] * n_out, axis=1)), initial=0.0)))
        vals[bn] = phases[j].value(d, bs)
    vals[sing] = 0.0
    rotation = 1 if variant == "T" else 0
    if rotation:
        vals = perp(vals)

    # fluxes
    if b:
        eta = forms.eta_array()
        eta_bar = forms.eta_bar_array()
        gH_loc = gH

        def jbar(x, tri):
            out = perp(gH_loc[tri])
            for p, dg in zip(vpts, vdeg):
                out = out + dg * _grad_arg(x, p)
            return out

        def pair(x, tri):
            jb = jbar(x, tri)
            ju = jb - np.einsum("i,ikd->kd", theta, eta[:, tri])
            return np.concatenate([
                np.einsum("kd,jkd->kj", ju, eta_bar[:, tri]),
                np.einsum("kd,jkd->kj", jb, eta_bar[:, tri]),
            ], axis=1)

        vals_q = integrate(mesh, pair, centers=vpts, value_shape=(2 * b,)).sum(axis=0)
        Phi = vals_q[:b]
        jb_eb = vals_q[b:]
        inner = np.einsum("itd,jtd,t->ij", eta, eta_bar, mesh.areas)
        Phi_id = -theta @ inner
    else:
        Phi = np.zeros(0)
        jb_eb = np.zeros(0)
        Phi_id = np.zeros(0)

    dec = PotentialDecomposition(
        mesh=mesh, interior_points=a_pts, interior_degrees=cfg.interior_degrees,
        boundary_points=c_pts, boundary_degrees=cfg.boundary_degrees,
        H=H, conjugate=Field(mesh, w), periods=periods, hole_points=hole_pts, forms=forms,
        theta=theta, Phi=Phi, Phi_identity=Phi_id, jbar_eta_bar=jb_eb,
    )
    base = np.zeros(mesh.n_nodes)
    for p, dg in zip(vpts, vdeg):
        r = mesh.nodes[root] - p
        base[0] += dg * math.atan2(r[1], r[0])
    for q, P in zip(hole_pts, periods):
        r = mesh.nodes[root] - q
        base[0] += round(P / TWO_PI) * math.atan2(r[1], r[0])
    offset = float(phase[root] - base[0] - w[root])
    diagnostics = {
        "quantization_defect": quant,
        "boundary_residual": raw_bc,
        "theta_principal": np.mod(theta_raw, TWO_PI).tolist(),
        "hole_alignment_spread": spread.tolist(),
        "periods_over_2pi": (periods / TWO_PI).tolist(),
        "root": root,
        "tree": tree,
        "neumann_integral": data.integral(),
    }
    return CanonicalMap(
        field=Field(mesh, vals), variant=variant, decomposition=dec, config=cfg, domain=d,
        singular_nodes=sing, phase_offset=offset, rotation=rotation, diagnostics=diagnostics,
    )


def _root_index(mesh: TriMesh, node: int) -> int:
    return int(np.flatnonzero(mesh.boundary_nodes == node)[0])


def _lift_theta(theta: np.ndarray, gram: np.ndarray, mode: str) -> np.ndarray:
    if len(theta) == 0:
        return theta
    if mode == "principal":
        return np.mod(theta, TWO_PI)
    b = len(theta)
    if b <= 4:
        grid = np.array(np.meshgrid(*[np.arange(-2, 3)] * b, indexing="ij")).reshape(b, -1).T
        cand = theta[None, :] + TWO_PI * grid
        energy = np.einsum("ki,ij,kj->k", cand, gram, cand)
        return cand[int(np.argmin(energy))]
    return theta - TWO_PI * np.round(theta / TWO_PI)


def rotate_variant(m: CanonicalMap) -> CanonicalMap:
    """Rotate the map pointwise by +pi/2, swapping the boundary condition type."""
    vals = perp(m.values)
    return CanonicalMap(
        field=Field(m.mesh, vals), variant="N" if m.variant == "T" else "T",
        decomposition=m.decomposition, config=m.config, domain=m.domain,
        singular_nodes=m.singular_nodes, phase_offset=m.phase_offset,
        rotation=(m.rotation + 1) % 4, diagnostics=dict(m.diagnostics),
    )


def save_decomposition_json(dec: PotentialDecomposition, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dec.to_dict()))
