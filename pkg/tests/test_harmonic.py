from __future__ import annotations

import json
import math

import numpy as np
import pytest

from glvortex.energy import jacobian_field
from glvortex.errors import CompatibilityError, ConfigError, ResolutionError
from glvortex.field import CellField
from glvortex.geometry import Domain, mesh_domain
from glvortex.harmonic import (
    boundary_phase,
    build_canonical_map,
    harmonic_one_forms,
    neumann_data,
    normalize_variant,
    prepare_domain,
    rotate_variant,
    save_decomposition_json,
    solve_neumann,
)
from glvortex.jacobian import circle_loop, winding_number
from glvortex.vortices import VortexConfiguration

from conftest import annulus_domain, canonical, circle, disk_domain, shipped


def test_neumann_oracle_linear_function():
    d = mesh_domain(disk_domain(), 0.04)
    # d/dn of x1 on the unit circle is cos(s)
    H = solve_neumann(d, lambda j, s: np.cos(s))
    x = d.mesh.nodes[:, 0]
    assert np.max(np.abs(H.values - (x - d.mesh.mean(x)))) < 2e-3


def test_neumann_rejects_incompatible_data():
    d = mesh_domain(disk_domain(), 0.08)
    with pytest.raises(CompatibilityError):
        solve_neumann(d, lambda j, s: np.ones_like(s))


def test_neumann_data_without_vortices_is_incompatible():
    with pytest.raises(CompatibilityError):
        neumann_data(VortexConfiguration(), disk_domain())


def test_neumann_data_single_interior_vortex_integrates_to_zero():
    cfg = VortexConfiguration.from_lists([((0.3, 0.2), 1)])
    g = neumann_data(cfg, disk_domain())
    assert abs(g.integral()) < 1e-8


def test_annulus_hole_potential():
    d = mesh_domain(annulus_domain(), 0.03)
    forms = harmonic_one_forms(d)
    r = np.linalg.norm(d.mesh.nodes, axis=1)
    assert np.max(np.abs(forms.phi[0].values - np.log(r) / math.log(0.5))) < 2e-3
    assert forms.gram[0, 0] == pytest.approx(2 * math.pi / math.log(2), rel=5e-3)


def test_two_hole_forms_orthonormal():
    comps = (circle(), circle(0.2, (-0.45, 0.0), "inner"), circle(0.15, (0.45, 0.1), "inner"))
    d = mesh_domain(Domain(comps), 0.04)
    phi, eta_bar = harmonic_one_forms(d)
    assert len(phi) == 2
    G = np.array([[a.inner(b) for b in eta_bar] for a in eta_bar])
    assert np.allclose(G, np.eye(2), atol=1e-10)


def test_no_holes_gives_no_forms():
    d = mesh_domain(disk_domain(), 0.1)
    assert harmonic_one_forms(d).b == 0


def test_boundary_phase_pair():
    cfg = VortexConfiguration.from_lists(boundary=[(0, 0.0, 1), (0, math.pi, 1)])
    (bp,) = boundary_phase(cfg, disk_domain())
    assert len(bp.arcs) == 2
    assert sorted(round(a[2], 12) for a in bp.arcs) == [round(-math.pi, 12), 0.0]
    assert bp.closure == pytest.approx(-2 * math.pi)


def test_boundary_phase_accumulates():
    cfg = VortexConfiguration.from_lists(boundary=[(0, 0.0, 1), (0, 2.0, 1), (0, 4.0, 2)])
    (bp,) = boundary_phase(cfg, disk_domain())
    assert len(bp.arcs) == 3
    assert np.allclose(bp.cumulative_offsets, [-math.pi, -2 * math.pi, -4 * math.pi])
    assert math.cos(bp.closure) == pytest.approx(1.0)


def test_boundary_phase_odd_component_rejected():
    cfg = VortexConfiguration.from_lists(boundary=[(0, 0.0, 1), (0, 1.0, 1), (0, 2.0, 1)])
    with pytest.raises(ConfigError):
        boundary_phase(cfg, disk_domain())


def test_boundary_phase_without_vortices_is_tangent():
    d = annulus_domain()
    cfg = VortexConfiguration.from_lists([((0.75, 0.0), 1), ((-0.75, 0.0), -1)])
    phases = boundary_phase(cfg, d)
    s = np.linspace(0, 1, 7)
    for bp in phases:
        assert np.allclose(bp.value(d, s), d.components[bp.component].tangent_at(s))


def test_normalize_variant():
    assert normalize_variant("tangential") == "T"
    assert normalize_variant("N") == "N"
    with pytest.raises(ValueError):
        normalize_variant("x")


@pytest.mark.parametrize("name", ["disk_interior", "disk_boundary_pair", "annulus_pair"])
def test_canonical_map_is_unit_with_boundary_condition(name):
    cfg, dm, m = canonical(name)
    mesh = dm.mesh
    mod = np.linalg.norm(m.values, axis=1)
    others = np.setdiff1d(np.arange(mesh.n_nodes), m.singular_nodes)
    assert np.allclose(mod[others], 1.0, atol=1e-12)
    assert np.all(mod[m.singular_nodes] == 0)
    keep = ~np.isin(mesh.boundary_nodes, m.singular_nodes)
    bn = mesh.boundary_nodes[keep]
    tau = np.concatenate([dm.components[j].tangent_at(s)[None] for j, s in
                          zip(mesh.boundary_component[keep], mesh.boundary_s[keep])])
    assert np.max(np.abs(np.sum(m.values[bn] * tau, axis=1))) < 1e-10
    assert m.diagnostics["quantization_defect"] < 1e-8


def test_canonical_map_windings_annulus():
    _, _, m = canonical("annulus_pair")
    assert winding_number(m, circle_loop((0.75, 0.0), 0.1)).degree == 1
    assert winding_number(m, circle_loop((-0.75, 0.0), 0.1)).degree == -1
    assert winding_number(m, circle_loop((0.0, 0.0), 0.6)).degree == 1
    assert winding_number(m, circle_loop((0.0, 0.0), 0.93)).degree == 1


def test_canonical_map_interior_winding_on_mesh_field():
    _, _, m = canonical("disk_interior")
    w = winding_number(m.field, circle_loop((0.5, 0.0), 0.2))
    assert w.degree == 1 and w.distance < 1e-3


def test_evaluate_matches_nodal_values():
    _, dm, m = canonical("annulus_pair")
    # boundary nodes carry the exact datum rather than the extension
    nodes = np.setdiff1d(np.arange(dm.mesh.n_nodes), np.r_[dm.mesh.boundary_nodes, m.singular_nodes])
    assert np.max(np.abs(m.evaluate(dm.mesh.nodes[nodes]) - m.values[nodes])) < 1e-9


@pytest.mark.parametrize("name", ["disk_interior", "annulus_pair"])
def test_spanning_tree_choice_does_not_matter(name):
    cfg, dm, m = canonical(name)
    other = build_canonical_map(cfg, dm, "T", tree="dfs")
    assert np.max(np.abs(other.values - m.values)) < 1e-9
    # another root only rotates the interior by the discrete boundary mismatch there
    bn, _ = dm.mesh.component_nodes(0)
    moved = build_canonical_map(cfg, dm, "T", root=int(bn[len(bn) // 3]))
    assert np.max(np.abs(moved.values - m.values)) < 2 * m.diagnostics["boundary_residual"] + 1e-9
    with pytest.raises(ValueError):
        build_canonical_map(cfg, dm, "T", root=-1)


def test_rotation_twice_negates_and_keeps_jacobian():
    cfg, dm, m = canonical("disk_boundary_pair")
    r1 = rotate_variant(m)
    assert r1.variant == "N"
    r2 = rotate_variant(r1)
    assert np.allclose(r2.values, -m.values, atol=1e-14)
    assert np.allclose(jacobian_field(r1.field).values, jacobian_field(m.field).values, atol=1e-12)


def test_normal_variant_is_tangent_to_boundary():
    cfg, dm, _ = canonical("disk_interior")
    m = build_canonical_map(cfg, dm, "N")
    mesh = dm.mesh
    n_in = dm.components[0].normal_at(mesh.boundary_s)
    assert np.max(np.abs(np.sum(m.values[mesh.boundary_nodes] * n_in, axis=1))) < 1e-10


def test_disk_smooth_part_matches_reflection():
    _, dm, m = canonical("disk_interior")
    x = dm.mesh.nodes
    ref = np.log(np.linalg.norm(x - np.array([2.0, 0.0]), axis=1))
    ref -= dm.mesh.mean(ref)
    assert np.max(np.abs(m.decomposition.H.values - ref)) < 5e-4


def test_annulus_flux_identity():
    _, _, m = canonical("annulus_pair")
    dec = m.decomposition
    assert dec.Phi.shape == (1,)
    assert np.allclose(dec.Phi, dec.Phi_identity, atol=1e-8)
    assert dec.modified_current_residual < 1e-8
    assert abs(dec.jbar_eta_bar[0]) < 1e-6


def test_theta_lifts():
    cfg, dm, m = canonical("annulus_pair")
    p = build_canonical_map(cfg, dm, "T", theta_lift="principal")
    assert 0 <= p.decomposition.theta[0] < 2 * math.pi
    gap = np.mod(p.decomposition.theta - m.decomposition.theta + math.pi, 2 * math.pi) - math.pi
    assert np.allclose(gap, 0.0, atol=1e-9)


def test_missing_vortex_node_is_resolution_error():
    d, cfg = shipped("disk_interior")
    plain = mesh_domain(d.components, 0.05)
    with pytest.raises(ResolutionError):
        build_canonical_map(cfg, plain)


def test_inadmissible_configuration_rejected():
    d, _ = shipped("disk_interior")
    bad = VortexConfiguration.from_lists([((0.5, 0.0), 2)])
    dm = prepare_domain(d, bad, 0.08)
    with pytest.raises(ConfigError):
        build_canonical_map(bad, dm)


def test_decomposition_json(tmp_path):
    _, _, m = canonical("annulus_pair")
    save_decomposition_json(m.decomposition, tmp_path / "dec.json")
    doc = json.loads((tmp_path / "dec.json").read_text())
    assert len(doc["Phi"]) == 1


def test_cell_field_inner_product():
    d = mesh_domain(disk_domain(), 0.1)
    one = CellField(d.mesh, np.ones(d.mesh.n_triangles))
    assert one.inner(one) == pytest.approx(d.mesh.area)
