"""Nodal fields on a triangulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh

__all__ = ["CellField", "Field"]


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar (N,) or 2-vector (N, 2) values on mesh nodes, linear on triangles."""

    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape[0] != self.mesh.n_nodes or vals.ndim not in (1, 2) or (vals.ndim == 2 and vals.shape[1] != 2):
            raise ValueError(f"field values of shape {vals.shape} do not match {self.mesh.n_nodes} nodes")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 2

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Linear interpolation at arbitrary points."""
        return self.mesh.interpolate(self.values, np.atleast_2d(points))

    def gradient(self) -> np.ndarray:
        """Per-triangle gradient; (M, 2) for scalars, (M, 2, 2) for vectors."""
        return self.mesh.gradient(self.values)

    def modulus(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1) if self.is_vector else np.abs(self.values)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.mesh, values)


@dataclass(frozen=True, eq=False)
class CellField:
    """Piecewise-constant data per triangle, shape (M,) or (M, 2)."""

    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape[0] != self.mesh.n_triangles:
            raise ValueError(f"cell values of shape {vals.shape} do not match {self.mesh.n_triangles} triangles")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def inner(self, other: "CellField") -> float:
        """L2 inner product over the mesh."""
        a, b = self.values, other.values
        prod = a * b if a.ndim == 1 else np.sum(a * b, axis=1)
        return float(np.sum(prod * self.mesh.areas))
