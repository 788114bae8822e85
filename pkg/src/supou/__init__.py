"""Stationary mean-reverting temperature model fitted from daily extrema.

The package estimates the parameter triple (beta, mu, l) of the diffusion
dX = l*beta*(mu - X) dt + sqrt(beta) dB from observed daily suprema/infima by
least squares on the analytic supremum CDF, and derives heat-wave risk
measures (occurrence probability, mean duration, severity area) and
prediction intervals by Monte Carlo.
"""

from ._util import ConfigError, DataError, EstimationError, NumericsError
from .bridge import (
    BridgeExpectation,
    BridgeSpec,
    BridgeTable,
    BridgeTableConfig,
    bridge_exponential_expectation,
    simulate_reversed_bridge,
)
from .estimator import (
    EstimationResult,
    OptConfig,
    OUSupremaEstimator,
    ParamBox,
    QuantileAnchors,
    StudyResult,
    compute_param_box,
    estimate,
    estimate_2d,
    mixing_decay_check,
    objective_qn,
    replication_study,
)
from .io import SeasonWindow, StationDataset, build_train_sample, ingest, write_csv_simple
from .pipeline import RunConfig, run_pipeline, run_study
from .process import (
    DailyExtrema,
    OUParams,
    SimConfig,
    batch_daily_extrema,
    empirical_sup_cdf,
    extract_daily_extrema,
    simulate_daily_extrema,
    simulate_path,
)
from .risk import (
    HeatwaveSpec,
    MonteCarloValue,
    PredictionIntervals,
    RiskReport,
    SingleThreshold,
    TwoThreshold,
    compute_risk_report,
    detect_heatwave,
    heatwave_probability,
    heatwave_summary,
    mean_duration,
    prediction_intervals,
    severity_area,
)
from .supcdf import (
    CdfGrid,
    CdfValue,
    conditional_inf_cdf,
    conditional_sup_cdf,
    stationary_sup_cdf,
    sup_cdf_inverse,
)

__version__ = "0.1.0"

__all__ = [
    "BridgeExpectation",
    "BridgeSpec",
    "BridgeTable",
    "BridgeTableConfig",
    "CdfGrid",
    "CdfValue",
    "ConfigError",
    "DailyExtrema",
    "DataError",
    "EstimationError",
    "EstimationResult",
    "HeatwaveSpec",
    "MonteCarloValue",
    "NumericsError",
    "OptConfig",
    "OUParams",
    "OUSupremaEstimator",
    "ParamBox",
    "PredictionIntervals",
    "QuantileAnchors",
    "RiskReport",
    "RunConfig",
    "SeasonWindow",
    "SimConfig",
    "SingleThreshold",
    "StationDataset",
    "StudyResult",
    "TwoThreshold",
    "batch_daily_extrema",
    "bridge_exponential_expectation",
    "build_train_sample",
    "compute_param_box",
    "compute_risk_report",
    "conditional_inf_cdf",
    "conditional_sup_cdf",
    "detect_heatwave",
    "empirical_sup_cdf",
    "estimate",
    "estimate_2d",
    "extract_daily_extrema",
    "heatwave_probability",
    "heatwave_summary",
    "ingest",
    "mean_duration",
    "mixing_decay_check",
    "objective_qn",
    "prediction_intervals",
    "replication_study",
    "run_pipeline",
    "run_study",
    "severity_area",
    "simulate_daily_extrema",
    "simulate_path",
    "simulate_reversed_bridge",
    "stationary_sup_cdf",
    "sup_cdf_inverse",
    "write_csv_simple",
]
