from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glvortex.errors import (
    CollarRangeError,
    DomainError,
    GeometryError,
    InputError,
    MeshError,
    ParamError,
    ResolutionError,
)
from glvortex.geometry import (
    Domain,
    build_component,
    build_domain,
    collar_inverse,
    collar_jacobian,
    collar_map,
    euler_characteristic,
    load_domain_description,
    mesh_domain,
)

from conftest import annulus_domain, circle, disk_domain


def ellipse(a, b, n=1024, orientation="outer"):
    return build_component({"kind": "ellipse", "center": [0, 0], "a": a, "b": b}, n, orientation)


def test_unit_circle_curvature_and_length():
    c = circle(n=512)
    assert abs(c.length - 2 * math.pi) < 1e-6
    assert np.max(np.abs(c.curvature - 1.0)) < 1e-4


def test_hole_orientation_reverses_total_curvature():
    c = circle(2.0, orientation="inner", n=512)
    assert abs(c.total_curvature + 2 * math.pi) < 1e-4


def test_ellipse_turning_number():
    assert abs(ellipse(2.0, 1.0).total_curvature - 2 * math.pi) < 1e-4


def test_frame_is_orthonormal_with_inward_normal():
    c = ellipse(1.5, 0.7)
    assert np.allclose(np.linalg.norm(c.tangent, axis=1), 1.0, atol=1e-10)
    assert np.allclose(np.linalg.norm(c.normal, axis=1), 1.0, atol=1e-10)
    assert np.allclose(c.normal, np.stack([-c.tangent[:, 1], c.tangent[:, 0]], axis=1))
    # the inward normal of an outer curve points towards the centre
    assert np.all(np.sum(c.normal * c.samples, axis=1) < 0)


def test_frenet_relations_second_order():
    errs = []
    for n in (256, 512):
        c = ellipse(1.5, 0.7, n=n)
        dtau = (np.roll(c.tangent, -1, axis=0) - np.roll(c.tangent, 1, axis=0)) / (2 * c.spacing)
        errs.append(np.max(np.abs(dtau - c.curvature[:, None] * c.normal)))
    assert errs[1] < errs[0] / 3.0


def test_self_intersecting_polyline_rejected():
    bowtie = {"kind": "polyline", "points": [[0, 0], [1, 1], [1, 0], [0, 1]]}
    with pytest.raises(GeometryError):
        build_component(bowtie, 256)


def test_curvature_resolution_error():
    with pytest.raises(ResolutionError):
        ellipse(1.0, 0.02, n=64)


def test_too_few_samples():
    with pytest.raises(ParamError):
        circle(n=8)


@pytest.mark.parametrize("b", [0, 1, 2])
def test_euler_characteristic(b):
    comps = [circle()]
    centers = [(-0.45, 0.0), (0.45, 0.0)]
    comps += [circle(0.2, centers[i], "inner") for i in range(b)]
    assert euler_characteristic(Domain(tuple(comps))) == 1 - b


def test_two_outer_components_rejected():
    with pytest.raises(GeometryError):
        Domain((circle(), circle(0.3, orientation="outer")), collar_radius=0.1)


def test_collar_map_on_circle():
    c = circle()
    assert np.allclose(collar_map(c, 0.0, 0.3, 0.5), [0.7, 0.0])
    assert collar_jacobian(c, 0.0, 0.3) == pytest.approx(0.7)
    assert np.allclose(collar_map(c, 1.0, 0.0, 0.5), c.point(1.0))
    with pytest.raises(CollarRangeError):
        collar_map(c, 0.0, 0.6, 0.5)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 6.0), st.sampled_from([-0.1, 0.1]))
def test_collar_jacobian_matches_finite_differences(y1, y2):
    c = _ELLIPSE
    y1 = y1 * c.length / 6.0
    h = 1e-5
    d1 = (collar_map(c, y1 + h, y2, 0.3) - collar_map(c, y1 - h, y2, 0.3)) / (2 * h)
    d2 = (collar_map(c, y1, y2 + h, 0.3) - collar_map(c, y1, y2 - h, 0.3)) / (2 * h)
    det = d1[0] * d2[1] - d1[1] * d2[0]
    assert abs(det - float(collar_jacobian(c, y1, y2))) < 1e-5


_ELLIPSE = ellipse(1.5, 1.0)


def test_collar_inverse_examples():
    d = disk_domain()
    j, y1, y2 = collar_inverse(d, (0.8, 0.0))
    assert (j, round(y1, 9), round(y2, 9)) == (0, 0.0, 0.2)
    j, y1, y2 = collar_inverse(d, (0.0, 1.0))
    assert abs(y2) < 1e-9 and abs(y1 - math.pi / 2) < 1e-9
    a = annulus_domain()
    j, _, y2 = collar_inverse(a, (0.0, 0.55))
    assert j == 1 and abs(y2 - 0.05) < 1e-9
    with pytest.raises(DomainError):
        collar_inverse(d, (1.1, 0.0))
    assert collar_inverse(d, (0.0, 0.0)) is None


def test_collar_radius_keeps_jacobian_positive():
    for d in (disk_domain(), annulus_domain(), Domain((ellipse(1.5, 0.8),))):
        for c in d.components:
            assert np.all(1 - d.collar_radius * np.abs(c.curvature) > 0)


def test_holes_must_be_inside():
    with pytest.raises(GeometryError):
        Domain((circle(), circle(0.5, (0.8, 0.0), "inner")))


def test_mesh_areas():
    d = mesh_domain(disk_domain(), 0.05)
    m = d.mesh
    assert abs(m.area - math.pi) < 0.01 * math.pi
    assert m.diameters.max() < 1.5 * 0.05
    assert m.min_angles.min() > np.radians(20)
    a = mesh_domain(annulus_domain(), 0.05)
    assert abs(a.mesh.area - 0.75 * math.pi) < 0.01 * 0.75 * math.pi


def test_hole_touching_outer_curve_fails_to_mesh():
    comps = [circle(), circle(0.3, (0.7, 0.0), "inner")]
    with pytest.raises(MeshError):
        mesh_domain(comps, 0.05)


def test_boundary_nodes_have_unique_collar_coordinates():
    d = mesh_domain(annulus_domain(), 0.05)
    m = d.mesh
    assert len(np.unique(m.boundary_nodes)) == len(m.boundary_nodes)
    pts = np.stack([d.components[j].point(s) for j, s in zip(m.boundary_component, m.boundary_s)])
    assert np.max(np.linalg.norm(pts - m.nodes[m.boundary_nodes], axis=1)) < 1e-9


def test_domain_description_errors(tmp_path):
    with pytest.raises(InputError):
        load_domain_description(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        load_domain_description(bad)
    good = tmp_path / "disk.json"
    good.write_text(json.dumps({"outer": {"kind": "circle", "radius": 1.0}, "h": 0.1}))
    d = build_domain(good)
    assert d.mesh is not None and d.b == 0
