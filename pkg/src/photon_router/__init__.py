"""Single-atom + microtoroidal-cavity photon router: steady-state spectra and
correlations, stochastic click-record simulation, and the click-analysis
pipeline."""

from .errors import (
    ConfigError,
    DegenerateFluxError,
    PhotonRouterError,
    RecordFormatError,
    ResourceLimitError,
    SolverError,
    StatisticalInsufficiencyError,
)
from .params import FIG1_PARAMS, SystemParams
from .model import (
    analytic_overcoupled,
    calibrate_drive,
    cooperativity,
    effective_model,
    empty_cavity_nbar,
    enhanced_decay,
    g2_curves,
    linear_response,
    routing_efficiency,
    saturation_curve,
    spectra,
)
from .trajectory import (
    ClickRecord,
    DetectorModel,
    TransitModel,
    TransitTruth,
    expected_transit_fluxes,
    inject_background,
    read_record,
    simulate_record,
    write_record,
)
from .analysis import (
    AveragedSignals,
    CorrelationResult,
    TransitEvent,
    averaged_signals,
    detect_transits,
    estimate_g2,
    false_detection_ratio,
    fit_relaxation,
    saturation_analysis,
)

__version__ = "0.1.0"

__all__ = [
    "AveragedSignals",
    "ClickRecord",
    "ConfigError",
    "CorrelationResult",
    "DegenerateFluxError",
    "DetectorModel",
    "FIG1_PARAMS",
    "PhotonRouterError",
    "RecordFormatError",
    "ResourceLimitError",
    "SolverError",
    "StatisticalInsufficiencyError",
    "SystemParams",
    "TransitEvent",
    "TransitModel",
    "TransitTruth",
    "analytic_overcoupled",
    "averaged_signals",
    "calibrate_drive",
    "cooperativity",
    "detect_transits",
    "effective_model",
    "empty_cavity_nbar",
    "enhanced_decay",
    "estimate_g2",
    "expected_transit_fluxes",
    "false_detection_ratio",
    "fit_relaxation",
    "g2_curves",
    "inject_background",
    "linear_response",
    "read_record",
    "routing_efficiency",
    "saturation_analysis",
    "saturation_curve",
    "simulate_record",
    "spectra",
    "write_record",
]
