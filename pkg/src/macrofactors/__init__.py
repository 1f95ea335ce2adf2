"""Macro-financial factor pipeline: panels, unit-root tests, a Kalman/EM
dynamic factor model, and CAPM / Fama-MacBeth pricing."""

from .config import PipelineConfig, validate_config
from .dfm import DFMFit, fit_mle, simulate_dfm
from .errors import InputError, MacroFactorError, NumericalError, ValidationError
from .kalman import StateSpaceParams, kalman_filter, kalman_smoother
from .panel import Panel, TimeSeries, align_and_assemble, standardize
from .pipeline import run_pipeline
from .pricing import capm_regress, fama_macbeth, newey_west_se
from .stationarity import adf_test, kpss_test, stationarity_pipeline, zivot_andrews

__version__ = "0.1.0"
