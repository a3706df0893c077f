from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glvortex.energy import (
    CORE_ENERGY_INTERIOR,
    Excision,
    closed_form_terms,
    core_energy,
    current_vertex_values,
    energy_sweep,
    gl_energy,
    jacobian_field,
    minimize_gl,
    recovery_energy,
    recovery_sequence,
    renormalized_energy,
    triangle_curl,
)
from glvortex.errors import ParamError, ResolutionError, UnsupportedDegreeError
from glvortex.field import Field
from glvortex.geometry import mesh_domain
from glvortex.harmonic import build_canonical_map, prepare_domain
from glvortex.jacobian import detect_atoms
from glvortex.vortices import VortexConfiguration

from conftest import annulus_domain, canonical, disk_domain, shipped


@pytest.fixture(scope="module")
def disk_mesh():
    return mesh_domain(disk_domain(), 0.05).mesh


def test_constant_field_has_zero_energy(disk_mesh):
    u = Field(disk_mesh, np.tile([0.6, 0.8], (disk_mesh.n_nodes, 1)))
    rep = gl_energy(u, 0.1)
    assert rep.total == pytest.approx(0.0, abs=1e-14)


def test_radial_field_on_annulus():
    m = mesh_domain(annulus_domain(), 0.02).mesh
    u = Field(m, m.nodes / np.linalg.norm(m.nodes, axis=1)[:, None])
    rep = gl_energy(u, 1.0)
    assert rep.dirichlet == pytest.approx(math.pi * math.log(2), rel=5e-3)


def test_excised_radial_field_on_disk():
    d = prepare_domain(disk_domain(), VortexConfiguration.from_lists([((0.0, 0.0), 1)]), 0.03,
                       core_size=0.002, core_radius=0.01)
    x = d.mesh.nodes
    r = np.linalg.norm(x, axis=1)
    vals = np.where(r[:, None] > 0, x / np.where(r > 0, r, 1.0)[:, None], 0.0)
    sigma = 0.05
    rep = gl_energy(Field(d.mesh, vals), 1.0, Excision(np.zeros((1, 2)), sigma))
    assert rep.dirichlet == pytest.approx(math.pi * math.log(1 / sigma), rel=1e-2)


def test_identity_map_jacobian_is_one(disk_mesh):
    J = jacobian_field(Field(disk_mesh, disk_mesh.nodes))
    assert np.allclose(J.values, 1.0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_jacobian_is_half_curl_of_current(c):
    m = _MESH
    x, y = m.nodes[:, 0], m.nodes[:, 1]
    u1 = c[0] + c[1] * x + c[2] * y + c[3] * x * y
    u2 = c[4] + c[5] * x + c[6] * y + c[7] * x * x
    u = Field(m, np.c_[u1, u2])
    curl = triangle_curl(m, current_vertex_values(u))
    assert np.allclose(curl, 2 * jacobian_field(u).values, atol=1e-9)


_MESH = mesh_domain(disk_domain(), 0.15).mesh


def test_renormalized_energy_disk_oracle():
    cfg, dm, m = canonical("disk_interior")
    res = renormalized_energy(cfg, dm, canonical=m)
    exact = -math.pi * math.log(1 - 0.25)
    assert res.W_closed_form == pytest.approx(exact, rel=1e-3)
    assert res.W_numeric == pytest.approx(exact, rel=2e-3)
    assert res.log_coefficient == pytest.approx(math.pi)


def test_renormalized_energy_boundary_pair_oracle():
    cfg, dm, m = canonical("disk_boundary_pair")
    res = renormalized_energy(cfg, dm, canonical=m)
    assert res.W_closed_form == pytest.approx(-math.pi * math.log(2), rel=2e-3)
    assert res.relative_gap < 5e-3
    assert res.W_closed_form_display != pytest.approx(res.W_closed_form, rel=0.1)


def test_renormalized_energy_rotation_invariant():
    d, _ = shipped("disk_interior")
    vals = []
    for t in (0.0, 1.1):
        cfg = VortexConfiguration.from_lists([((0.5 * math.cos(t), 0.5 * math.sin(t)), 1)])
        dm = prepare_domain(d, cfg, 0.04)
        res = renormalized_energy(cfg, dm, sigmas=[0.06, 0.03, 0.015, 0.0075])
        vals.append((res.W_numeric, res.W_closed_form))
    assert vals[0][0] == pytest.approx(vals[1][0], rel=5e-3)
    assert vals[0][1] == pytest.approx(vals[1][1], rel=2e-3)


def test_annulus_opposite_pair_attracts():
    d, _ = shipped("annulus_pair")
    W = []
    for t in (math.pi, math.pi / 2, math.pi / 4):
        cfg = VortexConfiguration.from_lists([((0.75, 0.0), 1), ((0.75 * math.cos(t), 0.75 * math.sin(t)), -1)])
        dm = prepare_domain(d, cfg, 0.03)
        W.append(renormalized_energy(cfg, dm, sigmas=[0.05, 0.025, 0.0125, 0.00625]).W_closed_form)
    assert W[0] > W[1] > W[2]


def test_closed_form_terms_single_interior_vortex():
    _, _, m = canonical("disk_interior")
    raw = closed_form_terms(m)
    assert raw["interior_interior"] == 0.0 and raw["cross"] == 0.0 and raw["flux"] == 0.0
    # H(a) = log|a - a/|a|^2| minus the mean of H over the disk
    assert raw["H_interior"] - m.decomposition.H.evaluate(np.zeros((1, 2)))[0] == pytest.approx(
        math.log(1.5) - math.log(2.0), abs=1e-3)


def test_renormalized_energy_rejects_bad_sigma():
    cfg, dm, m = canonical("disk_interior")
    with pytest.raises(ParamError):
        renormalized_energy(cfg, dm, canonical=m, sigmas=[0.3, 0.1])


def test_higher_degree_rejected():
    cfg = VortexConfiguration.from_lists([((0.3, 0.0), 2), ((-0.3, 0.0), -1)])
    d = disk_domain()
    with pytest.raises(UnsupportedDegreeError):
        renormalized_energy(cfg, d)
    with pytest.raises(UnsupportedDegreeError):
        recovery_sequence(cfg, d, 0.05)


def test_renorm_json(tmp_path):
    cfg, dm, m = canonical("disk_interior")
    res = renormalized_energy(cfg, dm, canonical=m)
    res.to_json(tmp_path / "r.json")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert {"W_numeric", "W_closed_form", "terms", "sigma_sequence"} <= doc.keys()


def test_recovery_field_plateau_and_zero():
    cfg, dm, m = canonical("disk_interior")
    eps = 0.05
    rec = recovery_sequence(cfg, dm, eps, canonical=m)
    r = np.linalg.norm(dm.mesh.nodes - np.array([0.5, 0.0]), axis=1)
    mod = np.linalg.norm(rec.values, axis=1)
    assert np.allclose(mod[r >= eps], 1.0, atol=1e-12)
    assert np.allclose(mod[r < eps], r[r < eps] / eps, atol=1e-12)
    assert np.allclose(rec.evaluate(np.array([[0.5, 0.0]])), 0.0)


def test_recovery_requires_small_eps_and_t_variant():
    cfg, dm, m = canonical("disk_interior")
    with pytest.raises(ParamError):
        recovery_sequence(cfg, dm, 0.3, canonical=m)
    n = build_canonical_map(cfg, dm, "N")
    with pytest.raises(ParamError):
        recovery_sequence(cfg, dm, 0.05, canonical=n)


def test_core_energy_is_eps_independent():
    cfg, dm, m = canonical("disk_interior", core_size=0.0025, core_radius=0.02)
    cores = [recovery_energy(recovery_sequence(cfg, dm, e, canonical=m), "cores").total for e in (0.04, 0.02, 0.01)]
    assert max(cores) / min(cores) < 1.2
    assert cores[-1] == pytest.approx(CORE_ENERGY_INTERIOR, rel=0.05)
    assert core_energy(cfg) == pytest.approx(CORE_ENERGY_INTERIOR)


def test_sweep_argument_checks():
    cfg, dm, m = canonical("disk_interior")
    with pytest.raises(ParamError):
        energy_sweep(cfg, dm, [0.05], canonical=m)
    with pytest.raises(ParamError):
        energy_sweep(cfg, dm, [0.02, 0.05], canonical=m)
    with pytest.raises(ResolutionError):
        energy_sweep(cfg, dm, [0.01, 0.001], canonical=m)


def test_sweep_slope_and_csv(tmp_path):
    cfg, dm, m = canonical("disk_interior", core_size=0.0025, core_radius=0.02)
    res = energy_sweep(cfg, dm, [0.04, 0.02, 0.012], canonical=m)
    assert res.slope == pytest.approx(math.pi, rel=0.02)
    assert res.reference_mass == pytest.approx(math.pi)
    res.to_csv(tmp_path / "s.csv")
    head = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert head == "eps,energy,energy_over_logeps,slope_estimate"


def test_fem_sweep_close_to_exact():
    cfg, dm, m = canonical("disk_interior", core_size=0.0025, core_radius=0.02)
    ex = energy_sweep(cfg, dm, [0.04, 0.02], canonical=m)
    fe = energy_sweep(cfg, dm, [0.04, 0.02], canonical=m, method="fem")
    for a, b in zip(ex.rows, fe.rows):
        assert b.energy == pytest.approx(a.energy, rel=0.02)


def test_minimizer_decreases_energy_and_keeps_constraint():
    d, cfg = shipped("disk_interior")
    dm = prepare_domain(d, cfg, 0.06, core_size=0.015, core_radius=0.1)
    m = build_canonical_map(cfg, dm)
    eps = 0.08
    rec = recovery_sequence(cfg, dm, eps, canonical=m)
    init = Field(dm.mesh, rec.values)
    out = minimize_gl(dm, eps, init, max_iter=60)
    assert gl_energy(out, eps).total < gl_energy(init, eps).total
    bn = dm.mesh.boundary_nodes
    tau = dm.components[0].tangent_at(dm.mesh.boundary_s)
    assert np.max(np.abs(np.sum(out.values[bn] * tau, axis=1))) < 1e-12
    atoms = detect_atoms(out, dm)
    assert atoms.total_mass == pytest.approx(math.pi)


def test_gl_energy_rejects_bad_eps(disk_mesh):
    with pytest.raises(ParamError):
        gl_energy(Field(disk_mesh, disk_mesh.nodes), 0.0)
