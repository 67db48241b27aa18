"""Normalized ground states of the Schrodinger-Poisson equation.

Library and CLI for computing and verifying normalized solutions
(lambda, u) of

    -Lap u + V(x) u + lambda u + (|x|^-1 * u^2) u = |u|^(p-2) u,
    u > 0,  int u^2 dx = a^2,

with p in (10/3, 6): radial and box discretizations, free-space Coulomb
solvers, the full energy bookkeeping (Pohozaev identities, fiber
profiles, multiplier extraction), potential admissibility checkers, a
bordered Newton solver with homotopy continuation, and a diagnostics
battery.
"""

from .coulomb import CoulombSolverConfig, hartree_B, solve_phi
from .energy import (
    EnergyBreakdown,
    ProblemParams,
    energy_breakdown,
    fiber_profile,
    fiber_stationary,
    gn_quotient,
    hls_quotient,
    j_v,
    lagrange_multiplier,
    pohozaev,
    pohozaev_alt,
)
from .fieldio import load_field, save_field
from .mesh import (
    BoxGrid,
    Field,
    RadialGrid,
    apply_laplacian,
    grad_sq,
    integrate,
    lp_norm,
    make_box_grid,
    make_radial_grid,
    rescale,
)
from .potentials import AssumptionReport, PotentialSpec, aubin_talenti
from .solver import (
    HomotopyLeg,
    HomotopySchedule,
    Solution,
    continuation,
    enforce_nonneg,
    ground_state,
    mp_path_level,
    newton_refine,
)
from .verify import diagnostics, scaling_identity_suite, sweep_mass

__version__ = "0.1.0"
