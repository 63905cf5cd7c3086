"""Generalized Backlund-Darboux transformation (GBDT) for the non-isospectral
canonical system ``w_x = i (z - x)^{-1} J H(x) w`` and its Riemann-Hilbert jumps."""

from .core import (
    BETA, H_BASE, J_BASE, GbdtTriple, HamiltonianField, ResidualReport, check_material_identity,
    check_structure, solve_identity_S,
)
from .engine import (
    GaugeMatrix, TripleTrajectory, evolve_triple, gauge_w0, gauge_w0_ode, multiplier_v,
    transfer_matrix, transformed_hamiltonian, transformed_solution,
)
from .explicit import (
    BASE, ExplicitFamilyParams, explicit_pi, explicit_S, explicit_transformed_hamiltonian,
    explicit_transformed_jump,
)
from .inverse import (
    InnerRealization, ThetaSplit, build_gbdt_data, realization_from_pole, reconstruct_u,
    recover_hamiltonian_and_jump,
)
from .rh import (
    FundamentalSolution, JumpData, boundary_values, integrate_fundamental, markov_m1,
    transformed_jump_via_v, verify_jump,
)

__version__ = "0.1.0"
