from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from glvortex.geometry import Domain, build_component
from glvortex.harmonic import build_canonical_map, prepare_domain
from glvortex.vortices import VortexConfiguration, load_vortices

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
FIXTURES = Path(__file__).resolve().parent / "fixtures"

SHIPPED = {
    "disk_interior": ("disk.json", "disk_interior.json"),
    "disk_boundary_pair": ("disk.json", "disk_boundary_pair.json"),
    "annulus_pair": ("annulus.json", "annulus_pair.json"),
}


def circle(r=1.0, center=(0.0, 0.0), orientation="outer", n=1024):
    return build_component({"kind": "circle", "center": list(center), "radius": r}, n, orientation)


def disk_domain(n=1024):
    return Domain((circle(n=n),))


def annulus_domain(n=1024):
    return Domain((circle(n=n), circle(0.5, orientation="inner", n=n)))


def shipped(name):
    from glvortex.geometry import build_domain

    dom, vor = SHIPPED[name]
    return build_domain(CONFIGS / dom, mesh=False), load_vortices(CONFIGS / vor)


_CACHE: dict = {}


def canonical(name, h=0.03, variant="T", **options):
    key = (name, h, variant, tuple(sorted(options.items())))
    if key not in _CACHE:
        d, cfg = shipped(name)
        dm = prepare_domain(d, cfg, h, **options)
        _CACHE[key] = (cfg, dm, build_canonical_map(cfg, dm, variant))
    return _CACHE[key]


@pytest.fixture
def disk():
    return disk_domain()


@pytest.fixture
def annulus():
    return annulus_domain()
