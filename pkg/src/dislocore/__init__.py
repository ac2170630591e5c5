"""Screw dislocations in planar domains: Green's functions, renormalised
energies, gradient-flow dynamics and boundary-datum functionals."""

__version__ = "0.1.0"

from .dirichlet import (
    BoundaryDatum,
    Corrector,
    SingularField,
    corrector,
    finite_eps_energy,
    limit_functional,
    limit_functional_n,
    renormalize,
)
from .dynamics import (
    SimulationOptions,
    Trajectory,
    collision_time,
    pair_bound,
    simulate,
    verify_boundary_bound,
    verify_pair_bound,
)
from .energy import (
    Configuration,
    StrainField,
    circulation,
    core_energy,
    extract_renormalized,
    near_boundary_decomposition,
    peach_koehler,
    peach_koehler_all,
    renormalized_energy,
)
from .geometry import Domain, in_region_C, in_region_D, separation
from .green import GreenEngine, LaplaceDirichletSolver
from .minimize import (
    MinimizationReport,
    MinimizeOptions,
    confinement_sweep,
    minimize_finite_eps,
    minimize_limit,
)

__all__ = [
    "BoundaryDatum",
    "Configuration",
    "Corrector",
    "Domain",
    "GreenEngine",
    "LaplaceDirichletSolver",
    "MinimizationReport",
    "MinimizeOptions",
    "SimulationOptions",
    "SingularField",
    "StrainField",
    "Trajectory",
    "circulation",
    "collision_time",
    "confinement_sweep",
    "core_energy",
    "corrector",
    "extract_renormalized",
    "finite_eps_energy",
    "in_region_C",
    "in_region_D",
    "limit_functional",
    "limit_functional_n",
    "minimize_finite_eps",
    "minimize_limit",
    "near_boundary_decomposition",
    "pair_bound",
    "peach_koehler",
    "peach_koehler_all",
    "renormalize",
    "renormalized_energy",
    "separation",
    "simulate",
    "verify_boundary_bound",
    "verify_pair_bound",
]
