"""Canonical harmonic maps, Ginzburg-Landau energies and vortex diagnostics
on planar domains with tangential or normal boundary conditions."""

from __future__ import annotations

from .energy import (
    EnergyReport,
    RenormalizedEnergyResult,
    current_field,
    energy_sweep,
    gl_energy,
    jacobian_field,
    minimize_gl,
    recovery_sequence,
    renormalized_energy,
)
from .errors import ConfigError, GLVortexError, InputError, NumericalError
from .field import CellField, Field
from .geometry import (
    BoundaryComponent,
    Domain,
    build_component,
    build_domain,
    collar_inverse,
    collar_map,
    euler_characteristic,
    mesh_domain,
)
from .harmonic import (
    CanonicalMap,
    PotentialDecomposition,
    boundary_phase,
    build_canonical_map,
    harmonic_one_forms,
    neumann_data,
    prepare_domain,
    rotate_variant,
    solve_neumann,
)
from .jacobian import (
    HalfDiskField,
    bad_set_measure,
    boundary_current_check,
    detect_atoms,
    dual_distance,
    level_set_degree,
    reflect_extend,
    winding_number,
)
from .vortices import (
    AtomicMeasure,
    VortexConfiguration,
    limit_measure,
    load_vortices,
    separation_radius,
    validate,
)

__version__ = "0.1.0"
