"""Multi-wavelength intensity interferometry: correlation functions, photon
conversion models, Monte Carlo coincidence counting and geometry estimation."""

from .conversion import (
    AmplitudeSet,
    CoherentPump,
    ConversionUnitary,
    PhotonState,
    ReferencePhases,
    apply_conversion,
    filter_project,
    hbt_coincidence,
    pump_fidelity,
    reference_fourfold,
    two_crystal_evolve,
    two_photon_filtered,
)
from .correlation import (
    CorrelationCurve,
    Quadrature,
    QuadratureError,
    correlation_curve,
    correlation_map,
    f_disc_closed_form,
    g2_delta,
    g2_e2i2,
    g2_no_e2i2,
    g2_single,
    gamma_closed_form,
    gamma_quadrature,
)
from .estimation import (
    CenterVector,
    DiameterEstimate,
    EstimationError,
    SeparationEstimate,
    estimate_diameter,
    estimate_separation,
    extract_center_vectors,
)
from .montecarlo import CoincidenceTally, Detection, histogram_to_curve, run_trials, simulate
from .scenario import ConfigError, ScenarioConfig, bundled
from .sources import Baseline, DiscSource, PointSource, Position3, SampledSource

__version__ = "0.1.0"

__all__ = [
    "AmplitudeSet",
    "Baseline",
    "CenterVector",
    "CoherentPump",
    "CoincidenceTally",
    "ConfigError",
    "ConversionUnitary",
    "CorrelationCurve",
    "Detection",
    "DiameterEstimate",
    "DiscSource",
    "EstimationError",
    "PhotonState",
    "PointSource",
    "Position3",
    "Quadrature",
    "QuadratureError",
    "ReferencePhases",
    "SampledSource",
    "ScenarioConfig",
    "SeparationEstimate",
    "apply_conversion",
    "bundled",
    "correlation_curve",
    "correlation_map",
    "estimate_diameter",
    "estimate_separation",
    "extract_center_vectors",
    "f_disc_closed_form",
    "filter_project",
    "g2_delta",
    "g2_e2i2",
    "g2_no_e2i2",
    "g2_single",
    "gamma_closed_form",
    "gamma_quadrature",
    "hbt_coincidence",
    "histogram_to_curve",
    "pump_fidelity",
    "reference_fourfold",
    "run_trials",
    "simulate",
    "two_crystal_evolve",
    "two_photon_filtered",
]
