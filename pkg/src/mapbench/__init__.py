"""Benchmarking of quantum devices and simulators with ensembles of random
dynamical maps driven to their steady states."""

from .channel import (
    KrausChannel,
    apply,
    from_choi,
    iterate,
    random_choi_channel,
    random_ginibre_kraus,
    random_stinespring,
    to_choi,
    to_superoperator,
)
from .circuit import (
    CircuitIR,
    NoiseModel,
    QubitNoise,
    SimState,
    build_random_circuit,
    circuit_to_channel,
    simulate_step,
)
from .linalg import RngStream
from .protocol import (
    BenchmarkReport,
    ProtocolConfig,
    compare_reports,
    ingest_external_histograms,
    read_report,
    run_benchmark,
    write_report,
)
from .rmt import (
    EmpiricalDistribution,
    MPParams,
    empirical_cdf,
    ks_distance,
    mp_cdf,
    mp_moment,
    mp_pdf,
    normal_probability_points,
    reference_output_distribution,
    sample_fixed_trace_wishart,
)
from .spectral import (
    ChannelSpectrum,
    SteadyStateDecomposition,
    analyze_spectrum,
    convergence_iterations,
    girko_fraction,
    steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "ChannelSpectrum",
    "CircuitIR",
    "EmpiricalDistribution",
    "KrausChannel",
    "MPParams",
    "NoiseModel",
    "ProtocolConfig",
    "QubitNoise",
    "RngStream",
    "SimState",
    "SteadyStateDecomposition",
    "analyze_spectrum",
    "apply",
    "build_random_circuit",
    "circuit_to_channel",
    "compare_reports",
    "convergence_iterations",
    "empirical_cdf",
    "from_choi",
    "girko_fraction",
    "ingest_external_histograms",
    "iterate",
    "ks_distance",
    "mp_cdf",
    "mp_moment",
    "mp_pdf",
    "normal_probability_points",
    "random_choi_channel",
    "random_ginibre_kraus",
    "random_stinespring",
    "read_report",
    "reference_output_distribution",
    "run_benchmark",
    "sample_fixed_trace_wishart",
    "simulate_step",
    "steady_state",
    "to_choi",
    "to_superoperator",
    "write_report",
]
