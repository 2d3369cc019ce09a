"""flab: a numerical laboratory for mean-field fluctuation moments.

Computes n-point moments of centered, square-root-scaled site averages
on finite lattice regions, compares them with the Gaussian (Wick)
moments they converge to, and verifies the decay bounds and cluster
expansions that control the convergence, all against exact brute-force
oracles at desk scale.
"""

from .algebra import (
    SX,
    SY,
    SZ,
    SI,
    SiteOperator,
    SiteState,
    center,
    commutator,
    expect,
    hermitian_basis,
    hs_coefficients,
    identity,
    op_norm,
    ordered_product,
    pure_state,
)
from .cluster import (
    ClusterExpansionCheck,
    CorrectionFunctional,
    DecompositionCheck,
    ProductPartFunctional,
    b_hat_bound,
    b_n_quantity,
    cluster_expansion_check,
    decomposition_check,
    f_correction_moment,
    n_hat_series,
    product_part_moment,
    wick_defect_moment,
)
from .combinatorics import (
    TupleClassification,
    classify_tuple,
    canonical_partitions,
    double_factorial,
    falling_factorial,
    integer_partitions_into_k,
    multinomial,
    ordered_partitions,
    pair_partitions,
    partitions_min2_one_gt2,
    q_sequence,
    set_partitions,
    stirling2,
)
from .errors import ConfigError, CostGuardError, KahanSum
from .fluctuations import (
    CcrDecayCheck,
    InducedMomentFunctional,
    SeminormComparisonCheck,
    SeminormEstimate,
    TensorPolynomial,
    ccr_decay_check,
    ccr_ideal_element,
    gamma_form,
    induced_moment,
    induced_moment_polynomial,
    seminorm_comparison_check,
    seminorm_nu_estimate,
    seminorm_nu_omega_estimate,
)
from .gaussian import (
    Covariance,
    GammaConsistencyCheck,
    WickDifferenceCheck,
    covariance_from_state,
    covariance_norm_estimate,
    gamma_consistency_check,
    shifted_wick_moment,
    wick_difference_bound_check,
    wick_moment,
)
from .lattice import (
    Metric,
    Region,
    ball_count,
    chain_metric,
    chain_region,
    count_subsets_with_spread,
    explicit_metric,
    grid2d_metric,
    k_spread,
    metric_from_json,
    region_distance,
    spread,
    spread_decomposition_witness,
    spread_optimal_enumeration,
)
from .states import (
    Assignment,
    CircuitState,
    CorrelatorValue,
    G0Estimate,
    GlobalState,
    MarkovState,
    ProductState,
    correlator,
    estimate_G0,
    expect_global,
    random_density,
    random_hermitian_unit,
    state_from_json,
)

__version__ = "0.1.0"
