"""Space-division relaying toolkit for MIMO two-way relay channels.

The library splits the relay's signal space along the joint geometry of
the two uplink channels, routes near-parallel directions to combined
(network-coded) decoding and near-orthogonal ones to joint decoding,
and provides exact rate formulas, optimizers, large-system limits, and
a reproducible Monte Carlo driver on top.

Hot kernels compile with numba when available; set TWRC_BACKEND=numpy
to force the pure-numpy fallback (results agree to the last couple of
bits; each backend is individually byte-reproducible).
"""

from ._kernels import BACKEND
from ._version import __version__
from .errors import (
    ClassificationAmbiguous,
    DegenerateChannel,
    DimensionMismatch,
    DomainError,
    IndexOutOfRange,
    NonConvergenceWarning,
    NotPSD,
    NotUnit,
    ParseError,
    PowerViolation,
    QuadratureFailure,
    RankDeficient,
    Singular,
    TwrcError,
)
from .linalg import (
    GsvdFactors,
    JointDecomposition,
    compact_svd,
    degree_of_orthogonality,
    gsvd,
    joint_decompose,
    rq_decompose,
)
from .montecarlo import (
    SCHEMES,
    FigureTable,
    Scenario,
    SweepResult,
    rayleigh_sample,
    region_points,
    reproduce_figure,
    run_scenario,
    splitmix64,
    worker_count,
)
from .optimize import (
    MacSolution,
    OptimizerSettings,
    PncAllocation,
    SdSolution,
    WeightedObjective,
    mac_covariance_optimize,
    optimal_projection_simo,
    pnc_power_allocate,
    projection_matrix,
    sd_optimize,
    trace_region,
)
from .rates import (
    MacPentagon,
    PowerConfig,
    RatePair,
    RateRegion,
    SdBlocks,
    SdConfig,
    TwrcInstance,
    capacity_upper_bound,
    default_relay_covariance,
    downlink_rates,
    mac_cd_region,
    mac_pentagon,
    pnc_rate_mimo,
    pnc_rate_simo,
    sd_effective_channels,
    sd_rate_pair,
    sd_uplink_rate,
    simo_region,
)
from .spectrum import (
    SPLIT_THRESHOLD,
    AedSpec,
    aed,
    approx_average_sum_rate,
    asymptotic_gap,
    high_snr_gap_empirical,
    normalized_gap,
    optimal_l_prime,
    planted_channel_pair,
    support_edge,
    symmetric_normalized_gap,
)

__all__ = [
    "__version__",
    "BACKEND",
    # errors
    "TwrcError", "DimensionMismatch", "RankDeficient",
    "ClassificationAmbiguous", "Singular", "NotPSD", "PowerViolation",
    "NotUnit", "DegenerateChannel", "DomainError", "QuadratureFailure",
    "ParseError", "IndexOutOfRange", "NonConvergenceWarning",
    # joint factorizations
    "JointDecomposition", "GsvdFactors", "compact_svd", "joint_decompose",
    "degree_of_orthogonality", "rq_decompose", "gsvd",
    # rates
    "PowerConfig", "TwrcInstance", "RatePair", "SdConfig", "MacPentagon",
    "RateRegion", "SdBlocks", "capacity_upper_bound", "mac_pentagon",
    "mac_cd_region", "pnc_rate_simo", "pnc_rate_mimo",
    "sd_effective_channels", "sd_uplink_rate", "downlink_rates",
    "sd_rate_pair", "simo_region", "default_relay_covariance",
    # optimizers
    "WeightedObjective", "OptimizerSettings", "MacSolution",
    "PncAllocation", "SdSolution", "optimal_projection_simo",
    "projection_matrix", "mac_covariance_optimize", "pnc_power_allocate",
    "sd_optimize", "trace_region",
    # limits
    "SPLIT_THRESHOLD", "AedSpec", "aed", "asymptotic_gap",
    "optimal_l_prime", "high_snr_gap_empirical", "normalized_gap",
    "symmetric_normalized_gap", "support_edge", "approx_average_sum_rate",
    "planted_channel_pair",
    # simulation
    "SCHEMES", "Scenario", "SweepResult", "FigureTable", "splitmix64",
    "rayleigh_sample", "run_scenario", "region_points", "reproduce_figure",
    "worker_count",
]
