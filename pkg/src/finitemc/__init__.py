"""Certified finite-state approximation of continuous-state Markov chains on [0,1]."""

from .errors import (
    CapabilityError,
    ConfigError,
    ConvergenceError,
    FiniteMcError,
    InfeasibleProgramError,
    InputDomainError,
    InvertibilityError,
    KernelIntegrityError,
    RegimeError,
    SingularMatrixError,
    StructuralChainError,
    UnboundedProgramError,
)
from .numerics import (
    LinearProgram,
    ParametricCdf,
    QuadratureRule,
    beta22,
    beta34,
    bisect,
    erlang22,
    gauss_legendre,
    solve_linear,
    solve_lp,
    tabulated_cdf,
    vector_quantile,
)
from .measures import (
    DiscreteDistribution,
    PerformanceFunctional,
    discrete_distribution,
    expectation,
    point_mass,
    sup_distance,
    variation_of_step,
)
from .kernels import (
    ConditionEstimates,
    Grid,
    KernelHandle,
    ResidueReport,
    TransitionMatrix,
    approx_kernel_handle,
    balance_residue,
    dyadic_grid,
    e1_factor,
    estimate_condition_bounds,
    regeneration_kernel,
    truncate_kernel,
)
from .stationary import (
    StationarySolution,
    check_absorbing_class,
    stationary_direct,
    stationary_power,
)
from .certificates import (
    ErrorCertificate,
    MeasureBound,
    bound_measure,
    build_lp,
    certify,
    e2_factor,
    write_certificates_csv,
)
from .queueing import (
    QueueModel,
    VwtState,
    fluid_approximation,
    functionals,
    load_queue_config,
    model_a,
    model_b,
    queue_model,
    vwt_kernel,
    vwt_step,
)
from .mcmc import (
    FunctionalStatistic,
    McmcConfig,
    McmcResult,
    dkw_band,
    kolmogorov_distance,
    one_step_samples,
    run_mcmc,
    write_samples_csv,
    write_statistics_csv,
)
from .bench import (
    ExperimentPlan,
    RateFit,
    RelativeError,
    fit_rate,
    parse_plan,
    relative_error_table,
    run_plan,
)

__version__ = "0.1.0"
