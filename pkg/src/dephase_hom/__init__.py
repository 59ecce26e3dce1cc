"""
Two-photon interference of photons from a dephasing quantum emitter.

Modules
-------
model      closed-form visibility and coherence-time relations
noise      Gaussian phase-noise covariances and sampling
hom        noise-averaged two-photon correlation and Monte-Carlo visibility
histogram  coincidence-peak combinatorics, synthetic histograms, file format
analysis   peak-area visibility estimators and parameter fits
fitting    bounded weighted least squares
"""

__version__ = "0.1.0"

from ._accel import BACKEND  # noqa: E402
from .errors import (ConsistencyError, DephaseHomError, DomainError, FitError,  # noqa: E402
                     ParseError, UnsupportedConfigurationError)
from .model import (BeamsplitterParams, EmitterParams, PhononModel, PulseSequence,  # noqa: E402
                    REFERENCE_EMITTERS, coherence_time, coherence_time_limit,
                    mean_phonon_number, phonon_dephasing_rate, tpi_visibility,
                    visibility_temperature_curve)
from .hom import mc_visibility  # noqa: E402
from .histogram import (CoincidenceHistogram, PeakShape, cluster_overlap_map,  # noqa: E402
                        enumerate_coincidence_pattern, read_histogram,
                        synthesize_histogram, write_histogram)
from .analysis import (fit_exponential_contrast, fit_peak_areas,  # noqa: E402
                       fit_visibility_vs_dt, fit_visibility_vs_temperature,
                       visibility_estimate)
from .fitting import FitResult, weighted_least_squares  # noqa: E402

__all__ = [
    "BACKEND", "BeamsplitterParams", "CoincidenceHistogram", "ConsistencyError",
    "DephaseHomError", "DomainError", "EmitterParams", "FitError", "FitResult",
    "ParseError", "PeakShape", "PhononModel", "PulseSequence", "REFERENCE_EMITTERS",
    "UnsupportedConfigurationError", "cluster_overlap_map", "coherence_time",
    "coherence_time_limit", "enumerate_coincidence_pattern", "fit_exponential_contrast",
    "fit_peak_areas", "fit_visibility_vs_dt", "fit_visibility_vs_temperature",
    "mc_visibility", "mean_phonon_number", "phonon_dephasing_rate", "read_histogram",
    "synthesize_histogram", "tpi_visibility", "visibility_estimate",
    "visibility_temperature_curve", "weighted_least_squares", "write_histogram",
]
