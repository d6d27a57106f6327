"""peresim: three-path interferometer simulation and Peres/Sorkin analysis.

The package simulates randomized shutter-cycle measurement runs of a
three-path interferometer under configurable instrument imperfections and
provides the analysis chain: interference-term extraction, Peres and Sorkin
statistics, phase-space reconstruction, fluctuation decomposition, curve
fits and a per-imperfection systematic error budget.
"""

__version__ = "0.1.0"

from .core import (
    CyclePowers,
    InterferenceTerms,
    PeresResult,
    PhasePoint,
    SorkinResult,
    interference_terms,
    normalize_phase,
    peres_parameter,
    sorkin_epsilon,
    sorkin_kappa,
    subtract_background,
)
from .forward import (
    ALL_CONFIGS,
    CONFIG_LABELS,
    CrosstalkSpec,
    FluctuationSpec,
    ImperfectionSpec,
    MeasurementLog,
    MeasurementRecord,
    NonlinearitySpec,
    PolarizationSpec,
    ResidualLightSpec,
    ShutterConfig,
    SourceSpec,
    detector_response,
    ideal_powers,
    imperfect_powers,
    invert_detector_response,
    simulate_measurement,
)
from .reconstruct import (
    CandidateSet,
    CorrectedPoint,
    candidate_phase_points,
    correct_phase_point,
    project_to_plane,
)
from .budget import (
    BudgetEntry,
    BudgetReport,
    SweepCurve,
    TauEstimate,
    apply_crosstalk,
    contrast_deviation,
    contrast_from_phase_noise,
    correct_nonlinearity,
    crosstalk_delta_f,
    crosstalk_from_epsilon,
    epsilon_from_crosstalk,
    estimate_tau,
    full_budget,
    mc_phase_fluctuations,
    mc_power_fluctuations,
    polarization_f,
    residual_light_sweep,
)
from .stats import (
    FluctuationEstimates,
    SeriesStats,
    autocorr_sem,
    decompose_fluctuations,
    filter_malfunctions,
)
from .fitting import (
    ContrastFit,
    ThermalizationFit,
    fit_contrast,
    fit_thermalization,
    nlls_minimize,
)
from .logio import dump_log, parse_log, read_log, write_log
from .config import RunConfig, config_json_schema, parse_config, read_config
from .pipeline import AnalysisReport, analyze_log, budget_run, simulate_run
from .reference import BENCHMARKS, TRANSMISSIONS
from . import errors

__all__ = [name for name in dir() if not name.startswith("_")]
