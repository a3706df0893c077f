"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

from __future__ import annotations

import json
import math
import time

import numpy as np
import pytest

from glvortex.cli import main
from glvortex.energy import (
    current_vertex_values,
    energy_sweep,
    gl_energy,
    jacobian_field,
    minimize_gl,
    recovery_sequence,
    renormalized_energy,
    triangle_curl,
)
from glvortex.field import Field
from glvortex.geometry import Domain, build_component, euler_characteristic, mesh_domain
from glvortex.harmonic import build_canonical_map, prepare_domain
from glvortex.jacobian import (
    HalfDiskField,
    bad_set_measure,
    circle_loop,
    detect_atoms,
    dual_distance,
    half_disk_energy,
    half_disk_mesh,
    jacobian_pairing,
    reflect_extend,
    sobolev_norm_squared,
    winding_number,
)
from glvortex.jacobian import boundary_modulus_error
from glvortex.vortices import limit_measure

from conftest import FIXTURES, SHIPPED, canonical, circle, shipped

NAMES = list(SHIPPED)


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {number} failed: {detail}"

    return emit


def test_criterion_01_gauss_bonnet(report):
    t0 = time.perf_counter()
    ell = build_component({"kind": "ellipse", "center": [0, 0], "a": 1.4, "b": 0.8}, 1024)
    domains = {
        "disk": Domain((circle(),)),
        "ellipse": Domain((ell,)),
        "annulus": Domain((circle(), circle(0.5, orientation="inner"))),
        "two-hole": Domain((circle(), circle(0.2, (-0.45, 0.0), "inner"), circle(0.15, (0.45, 0.1), "inner"))),
    }
    errs = {}
    for name, d in domains.items():
        total = sum(c.total_curvature for c in d.components) / (2 * math.pi)
        errs[name] = abs(total - (1 - d.b))
        assert euler_characteristic(d) == 1 - d.b
    dt = time.perf_counter() - t0
    ok = max(errs.values()) < 1e-3 and dt < 1.0
    report(1, "Gauss-Bonnet", ok, f"max error {max(errs.values()):.2e}, {dt:.2f} s")


def test_criterion_02_reflection(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    mesh = half_disk_mesh(1.0, 0.08)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    worst = 0.0
    for _ in range(10):
        a, b = rng.normal(size=6), rng.normal(size=6)
        basis = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y])
        u1 = y * (a @ basis)
        u2 = b @ basis
        u = HalfDiskField(Field(mesh, np.c_[u1, u2]), 1.0)
        ext = reflect_extend(u)
        c = rng.normal(size=3)
        phi = lambda p: c[0] + c[1] * p[:, 0] + c[2] * p[:, 1] ** 2
        eps = float(rng.uniform(0.1, 1.0))
        pairs = [
            (half_disk_energy(HalfDiskField(ext, 1.0), eps).total, half_disk_energy(u, eps).total),
            (sobolev_norm_squared(ext), sobolev_norm_squared(u.field)),
            (jacobian_pairing(ext, phi), jacobian_pairing(u.field, phi)),
        ]
        for full, half in pairs:
            worst = max(worst, abs(full - 2 * half) / max(1.0, abs(full)))
    dt = time.perf_counter() - t0
    report(2, "reflection doubling", worst < 1e-10 and dt < 5.0, f"max relative defect {worst:.2e}, {dt:.2f} s")


def test_criterion_03_jacobian_current(report):
    rng = np.random.default_rng(7)
    meshes = (mesh_domain(Domain((circle(),)), 0.05).mesh, canonical("disk_interior")[1].mesh)
    worst_abs = worst_scaled = 0.0
    for _ in range(5):
        for mesh in meshes:
            # random affine map plus nodal noise at the local node spacing keeps |grad u| of order one
            spacing = mesh._node_tree.query(mesh.nodes, k=2)[0][:, 1]
            A, b = rng.normal(size=(2, 2)), rng.normal(size=2)
            vals = mesh.nodes @ A.T + b + spacing[:, None] * rng.uniform(-1, 1, size=(mesh.n_nodes, 2))
            rough = rng.uniform(-1, 1, size=(mesh.n_nodes, 2))
            for bounded, v in ((True, vals), (False, rough)):
                u = Field(mesh, v)
                defect = np.abs(0.5 * triangle_curl(mesh, current_vertex_values(u)) - jacobian_field(u).values)
                if bounded:
                    worst_abs = max(worst_abs, float(np.max(defect)))
                scale = np.maximum(1.0, np.sum(mesh.gradient(v) ** 2, axis=(1, 2)))
                worst_scaled = max(worst_scaled, float(np.max(defect / scale)))
    ok = worst_abs < 1e-12 and worst_scaled < 1e-12
    report(3, "Ju = curl(ju)/2", ok,
           f"max defect {worst_abs:.2e} for fields with bounded gradient, "
           f"{worst_scaled:.2e} relative to |grad u|^2 for rough nodal noise")


def _phase_jump(m, d, v, delta=0.005):
    c = d.components[v.component]
    s = np.array([v.s - delta, v.s + delta])
    tau = c.tangent_at(s)
    u = m.evaluate(c.point(s))
    rel = np.arctan2(u[:, 1], u[:, 0]) - np.arctan2(tau[:, 1], tau[:, 0])
    return float((rel[1] - rel[0] + math.pi * v.degree + math.pi) % (2 * math.pi) - math.pi)


def test_criterion_04_canonical_map(report):
    t0 = time.perf_counter()
    h = 0.02
    lines, ok = [], True
    for name in NAMES:
        cfg, dm, m = canonical(name, h=h)
        bc = m.diagnostics["boundary_residual"]
        ok &= bc <= h
        for v in cfg.interior:
            w = winding_number(m.field, circle_loop(v.point, 0.1))
            ok &= w.degree == v.degree
        jumps = [abs(_phase_jump(m, dm, v)) for v in cfg.boundary]
        ok &= all(j < 5e-2 for j in jumps)
        msg = f"{name}: bc {bc:.1e}"
        if jumps:
            msg += f", jump error {max(jumps):.1e}"
        if dm.b:
            res = m.decomposition.modified_current_residual
            ok &= res < 1e-5
            msg += f", decomposition residual {res:.1e}"
        lines.append(msg)
    dt = time.perf_counter() - t0
    ok &= dt < 120
    report(4, "canonical map", bool(ok), "; ".join(lines) + f"; {dt:.1f} s")


def test_criterion_05_renormalized_energy(report):
    t0 = time.perf_counter()
    gaps, ok = [], True
    for name in NAMES:
        cfg, dm, m = canonical(name, h=0.02)
        res = renormalized_energy(cfg, dm, canonical=m)
        ok &= res.relative_gap < 0.02
        gaps.append(f"{name}: {res.W_numeric:.4f} vs {res.W_closed_form:.4f} ({100 * res.relative_gap:.2f}%)")
    dt = time.perf_counter() - t0
    report(5, "renormalized energy", bool(ok and dt < 120), "; ".join(gaps) + f"; {dt:.1f} s")


def test_criterion_06_energy_scaling(report):
    t0 = time.perf_counter()
    eps = [0.1, 0.05, 0.02, 0.01]
    lines, ok = [], True
    for name in NAMES:
        cfg, dm, m = canonical(name, h=0.02, core_size=0.0025, core_radius=0.02)
        sw = energy_sweep(cfg, dm, eps, canonical=m)
        W = renormalized_energy(cfg, dm, canonical=m).W_closed_form
        slope_err = abs(sw.slope - sw.reference_mass) / sw.reference_mass
        icpt_err = abs(sw.renormalized_intercept - W) / abs(W)
        ok &= slope_err < 0.05 and icpt_err < 0.15
        lines.append(f"{name}: slope {sw.slope:.4f} vs {sw.reference_mass:.4f} ({100 * slope_err:.1f}%), "
                     f"intercept-cores {sw.renormalized_intercept:.4f} vs W {W:.4f} ({100 * icpt_err:.1f}%)")
    dt = time.perf_counter() - t0
    report(6, "energy scaling", bool(ok and dt < 300), "; ".join(lines) + f"; {dt:.1f} s")


def test_criterion_07_detection(report):
    eps = 0.01
    lines, ok = [], True
    for name in NAMES:
        d, cfg = shipped(name)
        dm = prepare_domain(d, cfg, 0.02, core_size=eps / 4, core_radius=2 * eps)
        m = build_canonical_map(cfg, dm)
        found = detect_atoms(recovery_sequence(cfg, dm, eps, canonical=m), dm)
        exact = limit_measure(cfg, dm)
        match = len(found) == len(exact)
        err = 0.0
        for p, w in zip(exact.locations, exact.half_units):
            k = int(np.argmin(np.linalg.norm(found.locations - p, axis=1))) if len(found) else -1
            match &= k >= 0 and found.half_units[k] == w
            err = max(err, float(np.linalg.norm(found.locations[k] - p)) if k >= 0 else math.inf)
        dist = dual_distance(found, exact, dm.diameter)
        ok &= match and err <= 2 * eps and dist <= 0.1
        lines.append(f"{name}: {len(found)} atoms, location error {err:.1e}, dual distance {dist:.1e}")
    report(7, "detection round-trip", bool(ok), "; ".join(lines))


def test_criterion_08_topological_gate(report, tmp_path):
    cases = json.loads((FIXTURES / "validation_cases.json").read_text())
    wrong = []
    for i, case in enumerate(cases):
        dom, vor = tmp_path / f"d{i}.json", tmp_path / f"v{i}.json"
        dom.write_text(json.dumps(case["domain"]))
        vor.write_text(json.dumps(case["vortices"]))
        code = main(["validate", "--domain", str(dom), "--vortices", str(vor)])
        if code != (0 if case["admissible"] else 1):
            wrong.append(case["name"])
    report(8, "topological gate", len(cases) == 12 and not wrong,
           f"{len(cases)} cases, misclassified: {wrong or 'none'}")


def test_criterion_09_slicing(report):
    cfg, dm, m = canonical("disk_boundary_pair", h=0.02, core_size=0.0025, core_radius=0.04)
    bad, err = [], []
    for eps in (0.04, 0.01):
        rec = recovery_sequence(cfg, dm, eps, canonical=m)
        bad.append(sum(c.measure for c in bad_set_measure(rec, dm, eps)))
        err.append(boundary_modulus_error(rec, dm))
    ok = bad[1] < bad[0] and err[1] < err[0]
    report(9, "slicing diagnostics", ok,
           f"bad set {bad[0]:.4f} -> {bad[1]:.4f} (ratio {bad[0] / bad[1]:.2f}), "
           f"boundary modulus error {err[0]:.4f} -> {err[1]:.4f} (ratio {err[0] / err[1]:.2f})")


def test_criterion_10_minimizer(report):
    eps = 0.05
    d, cfg = shipped("disk_interior")
    dm = prepare_domain(d, cfg, 0.04, core_size=0.01, core_radius=0.1)
    m = build_canonical_map(cfg, dm, "T")
    init = Field(dm.mesh, recovery_sequence(cfg, dm, eps, canonical=m).values)
    u = minimize_gl(dm, eps, init, "tangential", max_iter=400)
    E = gl_energy(u, eps).total
    atoms = detect_atoms(u, dm)
    mass = atoms.total_mass
    bound = math.pi * abs(math.log(eps)) + 10
    ok = abs(mass - math.pi) <= 0.05 * math.pi and E <= bound
    report(10, "minimizer sanity", ok,
           f"Jacobian mass {mass / math.pi:.3f} pi, energy {gl_energy(init, eps).total:.3f} -> {E:.3f} "
           f"(bound {bound:.3f})")
