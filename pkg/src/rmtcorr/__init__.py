"""Sample correlation matrices in high dimensions: simulation, limit laws and estimators."""

from ._backend import BACKEND
from .datagen import DataModel, EntryLaw, MixingSpec, build_A, correlation_with_spectrum, generate, sample_Z
from .errors import ConvergenceError, InfeasibleMomentsError
from .estimators import (
    MomentVector,
    SpectrumEstimate,
    ThresholdRule,
    default_threshold,
    estimate_correlation_moments,
    increasing_path_average_bruteforce,
    moment_estimate,
    path_product,
    reconstruct_spectrum,
    threshold_estimate,
    trace_path_estimate,
)
from .lsd import (
    AtomicMeasure,
    LimitLaw,
    law_from_stieltjes,
    mp_density,
    mp_law,
    mp_stieltjes_closed,
    quantile,
    semicircle_density,
    semicircle_law,
    semicircle_stieltjes,
    solve_stieltjes,
    solve_stieltjes_zero_gamma,
)
from .matrix import (
    EigenDecomposition,
    EmpiricalSpectralDistribution,
    SymmetricMatrix,
    eigenvalues,
    kolmogorov_distance,
    spectral_norm,
    sym_eigen,
)
from .rng import RandomStream, substream_seed
from .spiked import SpikedModel, SpikePrediction, classify_spikes, psi, psi_prime, spike_threshold_delta1
from .stats import (
    ComparisonReport,
    ExtremeReport,
    comparison_report,
    extreme_report,
    max_offdiag_scaled,
    q_transform,
    sample_correlation,
    sample_covariance,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AtomicMeasure",
    "ComparisonReport",
    "ConvergenceError",
    "DataModel",
    "EigenDecomposition",
    "EmpiricalSpectralDistribution",
    "EntryLaw",
    "ExtremeReport",
    "InfeasibleMomentsError",
    "LimitLaw",
    "MixingSpec",
    "MomentVector",
    "RandomStream",
    "SpectrumEstimate",
    "SpikePrediction",
    "SpikedModel",
    "SymmetricMatrix",
    "ThresholdRule",
    "build_A",
    "classify_spikes",
    "comparison_report",
    "correlation_with_spectrum",
    "default_threshold",
    "eigenvalues",
    "estimate_correlation_moments",
    "extreme_report",
    "generate",
    "increasing_path_average_bruteforce",
    "kolmogorov_distance",
    "law_from_stieltjes",
    "max_offdiag_scaled",
    "moment_estimate",
    "mp_density",
    "mp_law",
    "mp_stieltjes_closed",
    "path_product",
    "psi",
    "psi_prime",
    "q_transform",
    "quantile",
    "reconstruct_spectrum",
    "sample_Z",
    "sample_correlation",
    "sample_covariance",
    "semicircle_density",
    "semicircle_law",
    "semicircle_stieltjes",
    "solve_stieltjes",
    "solve_stieltjes_zero_gamma",
    "spectral_norm",
    "spike_threshold_delta1",
    "substream_seed",
    "sym_eigen",
    "threshold_estimate",
    "trace_path_estimate",
]
