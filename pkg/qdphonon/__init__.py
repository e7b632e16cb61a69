"""
qdphonon: phonon dephasing and two-photon interference of quantum-dot
single-photon sources.
"""
__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    FitError,
    GridResolutionError,
    ParameterError,
    QDPhononError,
    QuadratureError,
)
from .config import Config, load_setup_record
from .cache import ResultCache
from .monitoring import PerformanceMonitor, monitor
from .numerics import FitResult, QuadratureResult, fourier_integral, integrate, least_squares_fit
from .phonon import (
    MaterialParams,
    PhononCorrelationTable,
    PhononParams,
    Temperature,
    dephasing_rate,
    filtered_fraction,
    franck_condon,
    phi,
    phonon_correlation,
    sideband_spectrum,
)
from .emitter import (
    CavityFilter,
    EmitterParams,
    FrequencyGrid,
    emission_spectrum,
    indistinguishability,
    indistinguishability_numeric,
)
from .experiment import (
    CoincidenceHistogram,
    FringeContrast,
    PeakAreas,
    SetupImperfections,
    analyze_hom,
    fit_fringe_contrast,
    fit_peak_areas,
    synthetic_hom_experiment,
)
from .tempfit import (
    ParameterPrior,
    VisibilityDataset,
    fit_visibility,
    synthetic_visibility_dataset,
    visibility_curve,
)

__all__ = [
    "__version__",
    "QDPhononError",
    "ParameterError",
    "QuadratureError",
    "FitError",
    "GridResolutionError",
    "DataError",
    "ConfigError",
    "Config",
    "load_setup_record",
    "ResultCache",
    "PerformanceMonitor",
    "monitor",
    "QuadratureResult",
    "FitResult",
    "integrate",
    "fourier_integral",
    "least_squares_fit",
    "PhononParams",
    "Temperature",
    "MaterialParams",
    "PhononCorrelationTable",
    "phi",
    "franck_condon",
    "phonon_correlation",
    "dephasing_rate",
    "sideband_spectrum",
    "filtered_fraction",
    "EmitterParams",
    "CavityFilter",
    "FrequencyGrid",
    "emission_spectrum",
    "indistinguishability",
    "indistinguishability_numeric",
    "FringeContrast",
    "CoincidenceHistogram",
    "PeakAreas",
    "SetupImperfections",
    "fit_fringe_contrast",
    "fit_peak_areas",
    "analyze_hom",
    "synthetic_hom_experiment",
    "VisibilityDataset",
    "ParameterPrior",
    "fit_visibility",
    "visibility_curve",
    "synthetic_visibility_dataset",
]
