"""Vortex configurations, topological admissibility and limit measures.

Degrees are integers.  Jacobian weights are kept as integer multiples of
``pi / 2`` (``half_units``) so that constraint checks and norms are exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InputError
from .geometry import Domain

__all__ = [
    "AtomicMeasure",
    "BoundaryVortex",
    "InteriorVortex",
    "ValidationReport",
    "Violation",
    "VortexConfiguration",
    "limit_measure",
    "load_vortices",
    "separation_radius",
    "validate",
]

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class InteriorVortex:
    point: tuple[float, float]
    degree: int


@dataclass(frozen=True)
class BoundaryVortex:
    """Vortex on boundary component ``component`` at arclength ``s``."""

    component: int
    s: float
    degree: int


@dataclass(frozen=True)
class VortexConfiguration:
    interior: tuple[InteriorVortex, ...] = ()
    boundary: tuple[BoundaryVortex, ...] = ()

    def __post_init__(self) -> None:
        inter = tuple(
            InteriorVortex((float(v.point[0]), float(v.point[1])), _as_int(v.degree)) for v in self.interior
        )
        bnd = tuple(BoundaryVortex(int(v.component), float(v.s), _as_int(v.degree)) for v in self.boundary)
        object.__setattr__(self, "interior", inter)
        object.__setattr__(self, "boundary", bnd)

    @classmethod
    def from_lists(
        cls,
        interior: Iterable[tuple[Sequence[float], int]] = (),
        boundary: Iterable[tuple[int, float, int]] = (),
    ) -> "VortexConfiguration":
        return cls(
            tuple(InteriorVortex(tuple(p), d) for p, d in interior),
            tuple(BoundaryVortex(j, s, d) for j, s, d in boundary),
        )

    @property
    def n_vortices(self) -> int:
        return len(self.interior) + len(self.boundary)

    @property
    def interior_points(self) -> np.ndarray:
        return np.array([v.point for v in self.interior], dtype=float).reshape(-1, 2)

    @property
    def interior_degrees(self) -> np.ndarray:
        return np.array([v.degree for v in self.interior], dtype=np.int64)

    @property
    def boundary_degrees(self) -> np.ndarray:
        return np.array([v.degree for v in self.boundary], dtype=np.int64)

    def boundary_points(self, d: Domain) -> np.ndarray:
        """Coordinates ``c_jk = gamma_j(s)`` of the boundary vortices."""
        pts = [d.components[v.component].point(v.s) for v in self.boundary]
        return np.array(pts, dtype=float).reshape(-1, 2)

    def all_points(self, d: Domain) -> np.ndarray:
        return np.vstack([self.interior_points, self.boundary_points(d)])

    def all_degrees(self) -> np.ndarray:
        return np.concatenate([self.interior_degrees, self.boundary_degrees])

    def max_abs_degree(self) -> int:
        degs = self.all_degrees()
        return int(np.max(np.abs(degs))) if len(degs) else 0

    def transformed(self, d_old: Domain, rotation: float = 0.0, shift: Sequence[float] = (0.0, 0.0)) -> "VortexConfiguration":
        """Apply a rigid motion to the interior points (boundary atoms keep their arclength)."""
        c, s = math.cos(rotation), math.sin(rotation)
        pts = self.interior_points @ np.array([[c, s], [-s, c]]) + np.asarray(shift, dtype=float)
        return VortexConfiguration(
            tuple(InteriorVortex(tuple(p), v.degree) for p, v in zip(pts, self.interior)), self.boundary
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "interior": [{"point": list(v.point), "degree": v.degree} for v in self.interior],
            "boundary": [{"component": v.component, "s": v.s, "degree": v.degree} for v in self.boundary],
        }


def _as_int(x: Any) -> int:
    if isinstance(x, bool) or not float(x).is_integer():
        raise ConfigError(f"vortex degree must be an integer, got {x!r}")
    return int(x)


def load_vortices(source: str | Path | Mapping[str, Any]) -> VortexConfiguration:
    """Parse ``{"interior": [...], "boundary": [...]}``."""
    if isinstance(source, Mapping):
        doc = source
    else:
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise InputError(f"vortex file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, Mapping):
        raise InputError("vortex description must be a JSON object")
    try:
        inter = tuple(
            InteriorVortex((float(e["point"][0]), float(e["point"][1])), e["degree"]) for e in doc.get("interior", [])
        )
        bnd = tuple(BoundaryVortex(int(e["component"]), float(e["s"]), e["degree"]) for e in doc.get("boundary", []))
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise InputError(f"malformed vortex entry: {exc!r}") from None
    try:
        return VortexConfiguration(inter, bnd)
    except ConfigError as exc:
        raise InputError(str(exc)) from None


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def to_dict(self) -> dict[str, Any]:
        return {"admissible": self.ok, "violations": [{"code": v.code, "message": v.message} for v in self.violations]}


def validate(cfg: VortexConfiguration, d: Domain, *, min_distance: float = 1e-9) -> ValidationReport:
    """List every violated admissibility constraint.

    Checked: nonzero degrees, valid component indices, interior points
    strictly inside, distinct positions, the degree balance
    ``sum d_i + (1/2) sum d_jk = 1 - b`` and even boundary degree sums on
    each component.
    """
    out: list[Violation] = []
    for i, v in enumerate(cfg.interior):
        if v.degree == 0:
            out.append(Violation("zero-degree", f"interior vortex {i} has degree 0"))
    for k, v in enumerate(cfg.boundary):
        if v.degree == 0:
            out.append(Violation("zero-degree", f"boundary vortex {k} has degree 0"))
        if not 0 <= v.component <= d.b:
            out.append(Violation("component-index", f"boundary vortex {k} refers to missing component {v.component}"))
    pts = cfg.interior_points
    if len(pts):
        _, _, y2 = d.project(pts)
        for i in np.flatnonzero(y2 <= min_distance):
            out.append(Violation("interior-outside", f"interior vortex {i} at {pts[i].tolist()} is not strictly inside"))
    good_b = [v for v in cfg.boundary if 0 <= v.component <= d.b]
    allp = np.vstack([pts, np.array([d.components[v.component].point(v.s) for v in good_b]).reshape(-1, 2)])
    if len(allp) > 1:
        diff = np.linalg.norm(allp[:, None] - allp[None], axis=2)
        iu = np.triu_indices(len(allp), 1)
        close = diff[iu] <= min_distance
        for a, b in zip(iu[0][close], iu[1][close]):
            out.append(Violation("coincident", f"vortices {a} and {b} coincide"))
    chi = 1 - d.b
    twice = 2 * int(cfg.interior_degrees.sum()) + int(cfg.boundary_degrees.sum())
    if twice != 2 * chi:
        out.append(Violation(
            "topological-restriction",
            f"sum d_i + (1/2) sum d_jk = {twice / 2:g} but the Euler characteristic is {chi}",
        ))
    for j in range(d.b + 1):
        s = sum(v.degree for v in cfg.boundary if v.component == j)
        if s % 2:
            out.append(Violation("even-integer", f"boundary degrees on component {j} sum to {s}, which is odd"))
    return ValidationReport(tuple(out))


def require_valid(cfg: VortexConfiguration, d: Domain) -> None:
    rep = validate(cfg, d)
    if not rep.ok:
        raise ConfigError("inadmissible configuration: " + "; ".join(v.message for v in rep.violations))


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite sum of weighted Dirac masses, weights in units of ``pi / 2``.

    Attributes
    ----------
    locations : (k, 2) array
    half_units : (k,) int array
        Weight of each atom divided by ``pi / 2``.
    """

    locations: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    half_units: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self) -> None:
        loc = np.array(self.locations, dtype=float).reshape(-1, 2)
        units = np.array(self.half_units, dtype=np.int64).reshape(-1)
        if len(loc) != len(units):
            raise ValueError("locations and weights differ in length")
        if np.any(units == 0):
            raise ValueError("atom weights must be nonzero")
        if len(loc) > 1:
            diff = np.linalg.norm(loc[:, None] - loc[None], axis=2)
            if np.any(diff[np.triu_indices(len(loc), 1)] == 0):
                raise ValueError("atom locations must be distinct")
        loc.setflags(write=False)
        units.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "half_units", units)

    @property
    def weights(self) -> np.ndarray:
        return self.half_units * HALF_PI

    @property
    def total_variation(self) -> float:
        return HALF_PI * int(np.abs(self.half_units).sum())

    @property
    def total_mass(self) -> float:
        return HALF_PI * int(self.half_units.sum())

    def __len__(self) -> int:
        return len(self.half_units)

    def to_csv(self, path: str | Path) -> None:
        rows = np.c_[self.locations, self.half_units].reshape(-1, 3)
        np.savetxt(path, rows, delimiter=",", header="x,y,weight_half_pi", comments="", fmt=["%.12g", "%.12g", "%d"])


def limit_measure(cfg: VortexConfiguration, d: Domain) -> AtomicMeasure:
    """Atoms ``pi d_i`` at ``a_i`` and ``(pi / 2) d_jk`` at ``c_jk``.

    Raises
    ------
    ConfigError
        If the configuration is not admissible on ``d``.
    """
    require_valid(cfg, d)
    loc = cfg.all_points(d)
    units = np.concatenate([2 * cfg.interior_degrees, cfg.boundary_degrees])
    return AtomicMeasure(loc, units)


def separation_radius(cfg: VortexConfiguration, d: Domain) -> float:
    """Half the minimum over vortex pair distances and interior-to-boundary distances."""
    if cfg.n_vortices == 0:
        raise ConfigError("separation radius is undefined without vortices")
    cands = []
    pts = cfg.all_points(d)
    if len(pts) > 1:
        diff = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        cands.append(float(diff[np.triu_indices(len(pts), 1)].min()))
    if len(cfg.interior):
        _, _, y2 = d.project(cfg.interior_points)
        cands.append(float(np.min(y2)))
    return 0.5 * min(cands)
