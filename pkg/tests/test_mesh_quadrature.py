from __future__ import annotations

import math

import numpy as np
import pytest

from glvortex.errors import MeshError
from glvortex.fem import solve_dirichlet, solve_pure_neumann
from glvortex.field import Field
from glvortex.geometry import mesh_domain
from glvortex.quadrature import integrate

from conftest import annulus_domain, disk_domain


@pytest.fixture(scope="module")
def disk_mesh():
    return mesh_domain(disk_domain(), 0.05).mesh


def test_triangles_are_counterclockwise(disk_mesh):
    assert np.all(disk_mesh.signed_areas > 0)


def test_requested_points_become_nodes():
    pts = [(0.3, 0.1), (-0.2, -0.4)]
    d = mesh_domain(disk_domain(), 0.08, points=pts, boundary_points=[(0, 1.0)], core_size=0.01, core_radius=0.02)
    m = d.mesh
    assert np.allclose(m.nodes[m.marked_nodes[:2]], pts)
    assert np.allclose(m.nodes[m.marked_nodes[2]], d.components[0].point(1.0))
    assert m.local_size(np.array(pts), 0.01).max() < 0.02


def test_point_outside_polygon_rejected():
    with pytest.raises(MeshError):
        mesh_domain(annulus_domain(), 0.08, points=[(0.1, 0.0)])


def test_interpolation_reproduces_linear_functions(disk_mesh):
    vals = 2.0 * disk_mesh.nodes[:, 0] - 3.0 * disk_mesh.nodes[:, 1] + 0.5
    rng = np.random.default_rng(0)
    r = 0.9 * np.sqrt(rng.random(200))
    t = 2 * math.pi * rng.random(200)
    x = np.c_[r * np.cos(t), r * np.sin(t)]
    got = Field(disk_mesh, vals).evaluate(x)
    assert np.max(np.abs(got - (2 * x[:, 0] - 3 * x[:, 1] + 0.5))) < 1e-12
    g = disk_mesh.gradient(vals)
    assert np.allclose(g, [2.0, -3.0])


def test_integrate_polynomial(disk_mesh):
    area = integrate(disk_mesh, lambda x, t: np.ones(len(x))).sum()
    assert abs(area - disk_mesh.area) < 1e-12
    second = integrate(disk_mesh, lambda x, t: x[:, 0] ** 2 + x[:, 1] ** 2).sum()
    # polygonal disk: compare against the moment of the mesh itself
    assert abs(second - math.pi / 2) < 2e-3


def test_integrate_log_singularity_by_fan(disk_mesh):
    got = integrate(disk_mesh, lambda x, t: np.log(np.linalg.norm(x, axis=1)), centers=[(0.0, 0.0)]).sum()
    assert abs(got + math.pi / 2) < 2e-3


def test_integrate_excision_of_inverse_square(disk_mesh):
    # int_{sigma < |x| < 1} |x|^-2 = 2 pi log(1 / sigma)
    sigma = 0.03
    f = lambda x, t: 1.0 / np.sum(x * x, axis=1)
    got = integrate(disk_mesh, f, centers=[(0.0, 0.0)], keep="outside", radius=sigma).sum()
    assert abs(got - 2 * math.pi * math.log(1 / sigma)) < 0.02


def test_dirichlet_solver_linear_exact(disk_mesh):
    bn = disk_mesh.boundary_nodes
    x = disk_mesh.nodes
    u = solve_dirichlet(disk_mesh, bn, x[bn, 0] + 2 * x[bn, 1])
    assert np.max(np.abs(u - (x[:, 0] + 2 * x[:, 1]))) < 1e-9


def test_neumann_solver_zero_mean(disk_mesh):
    rhs = disk_mesh.lumped_mass * disk_mesh.nodes[:, 0]
    u = solve_pure_neumann(disk_mesh, rhs)
    assert abs(disk_mesh.mean(u)) < 1e-10
