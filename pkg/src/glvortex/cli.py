"""Command-line front end.

Exit codes: 0 success, 1 constraint violation, 2 input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import svg
from .energy import energy_sweep, recovery_sequence, renormalized_energy
from .errors import ConfigError, InputError, NumericalError
from .geometry import Domain, build_domain
from .harmonic import build_canonical_map, prepare_domain
from .jacobian import detect_atoms, dual_distance
from .vortices import VortexConfiguration, limit_measure, load_vortices, require_valid, separation_radius, validate

log = logging.getLogger("glvortex")

EXIT_OK, EXIT_CONSTRAINT, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    domain: Path
    vortices: Path
    eps: list[float] = field(default_factory=list)
    sigma_min: float | None = None
    sigma_max: float | None = None
    out: Path = Path(".")
    h: float = 0.02
    variant: str = "tangential"
    svg: bool = True

    def check(self) -> None:
        for p in (self.domain, self.vortices):
            if not p.is_file():
                raise InputError(f"file not found: {p}")
        if not self.h > 0:
            raise InputError(f"--h must be positive, got {self.h}")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise InputError("--eps values must be strictly decreasing")
        if any(e <= 0 for e in self.eps):
            raise InputError("--eps values must be positive")


def _load(cfg: RunConfig) -> tuple[Domain, VortexConfiguration]:
    d = build_domain(cfg.domain, mesh=False)
    v = load_vortices(cfg.vortices)
    return d, v


def _meshed(cfg: RunConfig, d: Domain, v: VortexConfiguration, **options) -> Domain:
    require_valid(v, d)
    return prepare_domain(d, v, cfg.h, **options)


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2))


def cmd_validate(cfg: RunConfig) -> int:
    d, v = _load(cfg)
    rep = validate(v, d)
    doc = rep.to_dict()
    print(json.dumps(doc, indent=2))
    if cfg.out != Path("."):
        _write_json(cfg.out / "validation.json", doc)
    return EXIT_OK if rep.ok else EXIT_CONSTRAINT


def cmd_sweep(cfg: RunConfig) -> int:
    if len(cfg.eps) < 2:
        raise InputError("the sweep needs at least two --eps values")
    d, v = _load(cfg)
    dm = _meshed(cfg, d, v, core_size=min(cfg.eps) / 4.0, core_radius=2.0 * min(cfg.eps))
    res = energy_sweep(v, dm, cfg.eps)
    cfg.out.mkdir(parents=True, exist_ok=True)
    res.to_csv(cfg.out / "sweep.csv")
    _write_json(cfg.out / "sweep.json", res.to_dict())
    if cfg.svg:
        x = [r.eps for r in res.rows]
        svg.line_plot(cfg.out / "sweep.svg", np.log10(x), [r.energy_over_logeps for r in res.rows],
                      reference=res.reference_mass, xlabel="log10 eps", ylabel="E / |log eps|",
                      title="energy of recovery sequences")
    print(f"slope {res.slope:.6g}  reference {res.reference_mass:.6g}  intercept {res.intercept:.6g}")
    return EXIT_OK


def _sigmas(cfg: RunConfig, v: VortexConfiguration, d: Domain) -> list[float] | None:
    if cfg.sigma_min is None and cfg.sigma_max is None:
        return None
    sep = separation_radius(v, d)
    hi = cfg.sigma_max if cfg.sigma_max is not None else sep / 4.0
    lo = cfg.sigma_min if cfg.sigma_min is not None else hi / 32.0
    if not 0 < lo < hi:
        raise InputError("--sigma-min must be positive and below --sigma-max")
    return list(np.geomspace(hi, lo, 6))


def cmd_renorm(cfg: RunConfig) -> int:
    d, v = _load(cfg)
    dm = _meshed(cfg, d, v)
    res = renormalized_energy(v, dm, sigmas=_sigmas(cfg, v, d))
    _write_json(cfg.out / "renorm.json", res.to_dict())
    print(f"W_numeric {res.W_numeric:.6g}  W_closed_form {res.W_closed_form:.6g}  gap {100 * res.relative_gap:.3g}%")
    return EXIT_OK


def cmd_detect(cfg: RunConfig) -> int:
    d, v = _load(cfg)
    eps = cfg.eps[0] if cfg.eps else 0.01
    dm = _meshed(cfg, d, v, core_size=eps / 4.0, core_radius=2.0 * eps)
    rec = recovery_sequence(v, dm, eps)
    atoms = detect_atoms(rec, dm)
    exact = limit_measure(v, dm)
    cfg.out.mkdir(parents=True, exist_ok=True)
    atoms.to_csv(cfg.out / "atoms.csv")
    dist = dual_distance(atoms, exact, dm.diameter)
    _write_json(cfg.out / "detect.json", {
        "eps": eps,
        "atoms": [{"x": float(p[0]), "y": float(p[1]), "weight_half_pi": int(w)}
                  for p, w in zip(atoms.locations, atoms.half_units)],
        "total_variation": atoms.total_variation,
        "dual_distance_to_limit": dist,
    })
    print(f"{len(atoms)} atoms, total variation {atoms.total_variation:.6g}, dual distance {dist:.3g}")
    return EXIT_OK


def cmd_map(cfg: RunConfig) -> int:
    d, v = _load(cfg)
    dm = _meshed(cfg, d, v)
    m = build_canonical_map(v, dm, cfg.variant)
    dec = m.decomposition
    cfg.out.mkdir(parents=True, exist_ok=True)
    m.to_csv(cfg.out / "map_nodes.csv")
    _write_json(cfg.out / "map.json", {
        "variant": m.variant,
        "b": dm.b,
        "flux": dec.Phi.tolist(),
        "theta": dec.theta.tolist(),
        "periods": dec.periods.tolist(),
        "modified_current_residual": dec.modified_current_residual,
        "diagnostics": m.diagnostics,
    })
    if cfg.svg:
        svg.arrow_plot(cfg.out / "map.svg", dm.mesh.nodes, m.values,
                       curves=[c.samples for c in dm.components], markers=dec.vortex_points,
                       title=f"canonical map ({cfg.variant})")
    print(f"map with {dm.mesh.n_nodes} nodes, flux {np.round(dec.Phi, 8).tolist()}")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "sweep": cmd_sweep, "renorm": cmd_renorm,
            "detect": cmd_detect, "map": cmd_map}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glvortex", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--domain", required=True, type=Path, help="domain JSON")
        p.add_argument("--vortices", required=True, type=Path, help="vortex JSON")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--h", type=float, default=0.02, help="bulk mesh size")
        p.add_argument("--eps", type=float, nargs="+", default=[], help="decreasing eps values")
        p.add_argument("--sigma-min", type=float, default=None, help="smallest excision radius (renorm)")
        p.add_argument("--sigma-max", type=float, default=None, help="largest excision radius (renorm)")
        p.add_argument("--variant", choices=["tangential", "normal"], default="tangential",
                       help="boundary condition of the canonical map")
        p.add_argument("--no-svg", dest="svg", action="store_false", help="skip SVG figures")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = RunConfig(args.command, args.domain, args.vortices, list(args.eps), args.sigma_min, args.sigma_max,
                    args.out, args.h, args.variant, args.svg)
    try:
        cfg.check()
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
