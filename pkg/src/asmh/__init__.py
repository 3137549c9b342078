"""Active-subspace Metropolis-Hastings with exact pseudo-marginal acceptance.

The building blocks are importable from the package root; the command line
lives in :mod:`asmh.cli` (``python -m asmh``).
"""

from .config import RunConfig, load_config, parse_config
from .diagnostics import (
    AutocorrelationCurve,
    autocorrelation,
    batch_mean_se,
    effective_sample_size,
    gaussian_kde,
    mode_occupancy,
    scott_bandwidth,
    thin,
)
from .errors import (
    ASMHError,
    ConfigError,
    ConvergenceError,
    DiagnosticsError,
    LinAlgError,
    ODEError,
    SamplerError,
    SubspaceError,
    TargetError,
)
from .experiments import compare_runs, run_experiment
from .linalg import (
    EigenDecomposition,
    complete_orthonormal_basis,
    least_squares_fit,
    symmetric_eigendecompose,
    weighted_mean_covariance,
)
from .ode import (
    Lorenz96Params,
    ObservationRecord,
    Trajectory,
    TwoScaleParams,
    generate_lorenz96_data,
    integrate,
    integrate_batch,
    lorenz96_rhs,
)
from .samplers import (
    ChainOutput,
    InactiveKind,
    InactiveProposal,
    MarginalEstimate,
    ProposalSpec,
    SamplerMode,
    estimate_marginal,
    mh_accept,
    reconstruct_x_samples,
    run_asmh,
    run_vanilla_mh,
)
from .seeding import seed_sequence, stream
from .subspace import (
    ActiveSubspace,
    SpectralGap,
    SubspaceMethod,
    construct_gradient_covariance,
    construct_linear_regression,
    construct_posterior_covariance,
    detect_spectral_gap,
)
from .targets import (
    DensityModel,
    GaussianSpec,
    Lorenz96ExperimentConfig,
    MixtureVariant,
    gaussian_log_density,
    isotropic_gaussian,
    lorenz96_prior,
    make_lorenz96_posterior,
    make_mixture_experiment_target,
    mixture_log_density,
)

__version__ = "0.1.0"
