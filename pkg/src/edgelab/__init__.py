"""edge-lab: numerical laboratory for edge-scaled random matrix spectra.

Half-line random Schrodinger operators (continuum edge limits), finite
matrix ensembles feeding them, exponential-trace recovery statistics, and
reflected-bridge Monte Carlo for the same traces.
"""

from .core import (
    GeneralizedParams,
    PointConfiguration,
    SaoParams,
    sao_eta,
)
from .ensembles import (
    critical_spike_from_w,
    edge_rescale,
    edge_scale,
    lrt_error_curve,
    sample_beta_hermite,
    sample_spiked_gaussian,
    sample_spiked_wishart,
    soft_edge,
    spike_outlier,
)
from .estimators import (
    EstimatorSettings,
    FunctionalResult,
    TraceValue,
    F_beta,
    beta_from_energy,
    digamma,
    energy_statistic,
    estimator_T,
    estimator_T_from_trace,
    exp_trace,
    hamiltonian_energy,
    log_Z_gbe,
    rigidity_count,
    sao_trace_constant,
    trace_constant_formula,
    trace_leading_coefficient,
)
from .sao import (
    DiscretizedOperator,
    EigensolveError,
    GridSpec,
    build_coupled,
    build_generalized,
    build_sao,
    build_sao_coupled,
    build_sao_grid_pair,
    smallest_eigenvalues,
    spectrum_to_configuration,
    tridiagonal_count_below,
)
from .bridges import (
    ASYMPTOTIC_ITEMS,
    check_bridge_identities,
    draw_boundary_local_time,
    local_time_field,
    local_time_norm_sq,
    no_hit_probability,
    pitman_density_check,
    sample_bridge,
    silt_scaling_check,
    verify_bridge_asymptotics,
)
from .feynman_kac import (
    combinatorial_constant,
    combined_local_times,
    enumerate_matchings,
    mc_expected_trace,
    trace_constant_fit,
    trace_covariance_check,
)
from .experiments import (
    beta_recovery_sweep,
    covariance_trend,
    estimate_T_from_spectrum,
    leading_coefficient_fit,
    mean_trace_curve,
    paired_trace_delta,
    rigidity_success_rate,
    rigidity_trial,
    spike_outlier_trial,
)

__version__ = "0.1.0"
