"""Wall-to-wall heat transport: spectral evaluation, designs, and bounds.

A numpy/scipy library for steady advective heat transport across a 2D
fluid layer: direct and variational (primal/dual) evaluation of the
Nusselt number, convection-roll and branching streamline designs, the
integral efficiency functional with its per-wavenumber kernel
decomposition, and a priori transport bounds.
"""

from .domain import DomainSpec, build_domain
from .errors import InfeasibleError, OptimizerError, ResolutionError, SolverError
from .fields import (
    SpectralField,
    VelocityField,
    dx,
    dz,
    energy_norm,
    enstrophy_norm,
    field_from_json,
    field_from_profiles,
    field_to_json,
    laplacian,
    random_scalar,
    random_velocity,
    scale_to_intensity,
    streamfunction_to_velocity,
    zero_field,
)
from .operators import inverse_laplacian
from .advection import (
    KernelDecomposition,
    advection_term,
    greens_kernel,
    kernel_l1_bound_check,
    mode_decomposition,
)
from .transport import (
    TransportReport,
    conduction_lift,
    evaluate_transport,
    nu_direct,
    nu_dual,
    nu_dual_opt,
    nu_primal,
    nu_primal_opt,
    solve_steady_theta,
    solve_symmetrized,
)
from .designs import (
    BranchingParams,
    RollParams,
    branching_amplitudes,
    build_branching,
    build_branching_from_params,
    build_roll,
    predicted_interaction_modes,
    roll_optimal_params,
    select_branching_params,
    suggest_branching_domain,
    suggest_roll_domain,
    validate_branching,
)
from .optimizer import (
    EfficiencyReport,
    LengthscaleProfile,
    analytic_branching_bound,
    efficiency_energy,
    efficiency_enstrophy,
    fit_scaling,
    solve_1d_lengthscale,
)
from .bounds import (
    BoundCertificate,
    check_lingrowth,
    energy_bound,
    howard_value,
    spectral_constraint_M,
    symmetrization_bound,
    symmetrization_bound_min,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
