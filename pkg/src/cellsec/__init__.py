"""Physical-layer secrecy toolkit for downlink multi-antenna cellular networks.

Two parallel evaluation paths: a Monte Carlo simulator of Poisson-distributed
base stations and users under regularized channel inversion precoding, and an
analytic evaluator built on deterministic equivalents, shot-noise transforms,
and numerical quadrature. Each validates the other.
"""

__version__ = "0.1.0"

from .analytic import (
    DeterministicEquivalents,
    LognormalFit,
    MomentSummary,
    QuadratureSettings,
    deterministic_equivalents,
    incomplete_beta,
    interference_moments,
    laplace_interference,
    laplace_interference_numeric,
    laplace_leakage,
    laplace_leakage_numeric,
    leakage_moments,
    lognormal_fit,
    mean_rate_lower_bound,
    mean_secrecy_rate,
    outage_probability,
    tau,
)
from .errors import ContractError, DomainError, NumericsError, ResourceError
from .geometry import (
    NetworkRealization,
    PercolationReport,
    build_realization,
    percolation_report,
    percolation_threshold,
    sample_ppp,
    simulation_window_radius,
)
from .montecarlo import (
    EstimateWithCI,
    SampleSet,
    collect_interference_leakage,
    empirical_laplace,
    estimate_mean_rate,
    estimate_outage,
    trial_rng,
)
from .params import (
    CooperationConfig,
    SystemParams,
    derive_params,
    optimal_regularization,
    params_from_dict,
    params_to_dict,
)
from .physical import (
    ChannelSet,
    PrecoderResult,
    SinrBreakdown,
    approx_secrecy_rate,
    build_precoders,
    compute_sinrs,
    rci_precoder,
    sample_channel,
    sample_channel_set,
    secrecy_rate,
)
