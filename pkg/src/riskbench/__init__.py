"""riskbench: biased and unbiased VaR / ES estimation, calibration, backtesting."""

from .backtest import (
    BacktestConfig,
    BacktestReport,
    MethodReplicationStats,
    MethodResult,
    ReplicationSummary,
    WindowPairing,
    acerbi_z,
    bias_statistic,
    exceedance_rate,
    joint_var_es_score,
    mean_score,
    replication_study,
    rolling_backtest,
    split_windows,
    var_score,
)
from .calibration import (
    CalibrationEntry,
    CalibrationTable,
    ExceedanceCheck,
    PivotalDraw,
    empirical_es,
    pivotality_check,
    secured_position_es,
    solve_unbiased_es_constant,
)
from .data_io import (
    ReturnSeries,
    SimulationSpec,
    fit_gaussian,
    load_returns_csv,
    simulate_series,
    write_report,
)
from .errors import (
    CalibrationError,
    CalibrationFailureError,
    CalibrationMissingError,
    ConfigError,
    DataError,
    DegenerateFitError,
    DomainError,
    EmptyTailError,
    EstimationError,
    InfiniteMeanTailError,
    IngestionError,
    InsufficientTailError,
    LevelTooHighError,
    OutputError,
    RiskbenchError,
    SizeError,
    TailError,
)
from .estimators import (
    CornishFisherAdjustment,
    GaussianParams,
    GpdFit,
    RiskEstimate,
    RiskLevel,
    StudentTParams,
    canonical_method,
    cornish_fisher_z,
    es_cornish_fisher,
    es_empirical,
    es_gaussian,
    es_gaussian_unbiased,
    es_gpd,
    fit_gpd_pwm,
    fit_student_t,
    gpd_es_capital,
    gpd_var_capital,
    mean_estimator,
    student_t_var_capital,
    var_cornish_fisher,
    var_empirical,
    var_empirical_simple,
    var_gaussian,
    var_gaussian_unbiased,
    var_gpd,
    var_kde,
    var_student_t,
)
from .stats_core import (
    MomentSummary,
    SeededRng,
    draw_gaussian,
    draw_pivotal_pair,
    draw_pivotal_pairs,
    gaussian_cdf,
    gaussian_pdf,
    gaussian_quantile,
    sample_moments,
    student_t_quantile,
    type7_quantile,
)

__version__ = "0.1.0"
