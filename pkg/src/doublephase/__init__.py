"""Double-phase Dirichlet eigenvalue solver.

Computes the principal eigenvalue of the weighted p-Laplacian on box domains,
certifies that it is the spectral threshold of the double-phase problem, and
produces nonnegative eigenpairs above the threshold by minimizing the energy
over the Nehari manifold.
"""

from .errors import (
    ConfigError,
    HypothesisError,
    HypothesisWarning,
    InfeasibleError,
    NonConvergenceError,
    StalePositivityWarning,
)
from .grid import (
    Grid,
    GridSpec,
    GradientField,
    ScalarField,
    build_grid,
    bump_field,
    dirichlet_field,
    field_from_function,
    field_from_values,
    gradient,
    integrate_cells,
    nodal_to_cell,
    zero_field,
)
from .modular import (
    DoublePhase,
    Exponents,
    Weight,
    constant_weight,
    coordinate_weight,
    distance_weight,
    growth_envelope_check,
    load_weight,
    luxemburg_norm,
    lq_norm_q,
    make_weight,
    power_weight,
    rho_theta,
    rho_theta0,
    theta,
    weight_from_nodal,
)
from .operators import (
    Problem,
    Residual,
    default_epsilon,
    energy,
    energy_derivative,
    pairing_q,
    pairing_weighted_p,
    residual,
)
from .spectrum import (
    EigenOptions,
    EigenResult,
    NonexistenceReport,
    SweepRow,
    lambda_star_curve,
    nonexistence_certificate,
    principal_eigenvalue,
    rayleigh_quotient,
)
from .nehari import (
    EigenpairDiagnostics,
    MinimizerResult,
    NehariPoint,
    SolveOptions,
    best_result,
    extract_eigenpair,
    fiber_map,
    minimize_on_nehari,
    multistart_minimize,
    nehari_project,
)

__version__ = "0.1.0"
