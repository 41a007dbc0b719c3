"""Numerical and combinatorial laboratory for the singular mean field
equation on the flat torus with sign-changing potential."""

__version__ = "0.1.0"

from .energy import (
    Barycenter,
    EnergyContext,
    EnergyValue,
    bubble,
    bubble_singular,
    concentration_measure,
    cutoff_chi,
    energy,
    gradient,
    hessian_apply,
    mass_in_ball,
)
from .homology import (
    BettiVector,
    bar_betti_base,
    bar_betti_oracle,
    betti_closed,
    d_q_closed,
    existence_gate,
    multiplicity_8pi16pi,
    multiplicity_general,
    s,
    smash_join,
    suspension,
    wedge,
)
from .singular import (
    ConicalConfig,
    ConicalPoint,
    Potential,
    SurfaceTopology,
    classify_sign_regions,
    critical_set,
    effective_potential_field,
    geometric_lambda,
    j_lambda,
    singular_weight,
)
from .solver import (
    BranchRecord,
    SolutionRecord,
    SolverOptions,
    continue_branch,
    kato_diagnostics,
    minimize,
    morse_index,
    newton_solve,
    quantization_check,
    subdomain_integral,
)
from .surface import (
    Field,
    Grid,
    Torus,
    dirichlet_energy,
    integrate,
    inner,
    laplacian,
    load_field,
    save_field,
    solve_poisson,
)
