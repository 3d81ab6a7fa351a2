"""Joint-measurement toolkit for fermionic observables.

Builds the measurement-setting families, simulates protocol runs on
classically simulable states, post-processes outcomes into unbiased
estimators of Majorana monomials and chemistry Hamiltonians, and evaluates
and optimizes the estimator variance analytically.
"""

from .estimation import (
    CoefficientTable,
    GaussianExpectationOracle,
    HamiltonianSpec,
    ShotRecord,
    StatevectorExpectationOracle,
    VisibilityCache,
    analytic_variance,
    covariance_entry,
    gamma_estimate,
    hamiltonian_single_shot,
    median_of_means,
    optimize_coefficients,
    postprocess,
    sample_complexity,
    uniform_coefficients,
)
from .flo import (
    FlatBlock,
    ModePermutation,
    OrthogonalMatrix,
    build_flat_block,
    compose_setting,
    permutation_to_orthogonal,
    submatrix_det,
    visibility,
)
from .gaussian import (
    GaussianState,
    apply_orthogonal,
    conjugate_monomial,
    expectation,
    init_fock,
    pfaffian,
    sample_pair_outcomes,
)
from .hamio import HamiltonianFile, parse, serialize
from .majorana import (
    IndexSet,
    ModeCount,
    SignedTerm,
    commutes,
    index_set,
    monomial_product,
    symmetric_difference,
)
from .sampling import estimate_hamiltonian, estimate_monomials, run_experiment
from .schemes import (
    ClusterPartition,
    CoverageReport,
    GridLayout,
    MeasurementSetting,
    SettingFamily,
    build_family,
    build_pair_scheme,
    build_physical_scheme,
    build_quadruple_scheme_prime,
    build_random_partition_scheme,
    coverage_check,
    embed_modes,
)

__version__ = "0.1.0"
