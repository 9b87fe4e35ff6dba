"""Rolling-window backtesting, scoring and replication studies.

The protocol: a series is tiled into consecutive windows of length ``w``
(trailing remainder dropped); window k produces the capital estimates that
are evaluated on window k+1. Exceedances are strict (``x + capital < 0``;
ties count as non-exceedances). Every statistic that cannot be computed is
reported as absent with a reason, never silently zeroed.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.special as sc

from .errors import (
    ConfigError,
    DomainError,
    EmptyTailError,
    RiskbenchError,
    SizeError,
)
from .estimators import (
    ES_METHODS,
    GaussianParams,
    RiskLevel,
    batch_es_capitals,
    batch_var_capitals,
    canonical_method,
    window_stats,
)
from .stats_core import SeededRng, _type7_sorted_rows, draw_gaussian

MEASURES = ("var", "es", "both")


@dataclass(frozen=True)
class BacktestConfig:
    """Backtest parameters; ``alpha`` is deliberately mandatory."""

    alpha: float
    methods: tuple
    window: int = 50
    measure: str = "var"
    gpd_threshold_quantile: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(RiskLevel(self.alpha)))
        if int(self.window) < 2:
            raise ConfigError(f"window must be at least 2, got {self.window!r}")
        object.__setattr__(self, "window", int(self.window))
        if self.measure not in MEASURES:
            raise ConfigError(f"measure must be one of {MEASURES}, got {self.measure!r}")
        tags = []
        for tag in self.methods:
            canon = canonical_method(tag)
            if canon not in tags:
                tags.append(canon)
        if not tags:
            raise ConfigError("at least one method tag is required")
        if self.measure in ("es", "both"):
            bad = [t for t in tags if t not in ES_METHODS]
            if bad:
                raise ConfigError(
                    f"methods {', '.join(bad)} have no Expected Shortfall form; "
                    f"ES-capable methods: {', '.join(ES_METHODS)}"
                )
        object.__setattr__(self, "methods", tuple(tags))
        q = float(self.gpd_threshold_quantile)
        if not 0.0 < q < 1.0:
            raise ConfigError(f"gpd_threshold_quantile must lie in (0, 1), got {q!r}")
        object.__setattr__(self, "gpd_threshold_quantile", q)


@dataclass(frozen=True)
class WindowPairing:
    """Consecutive disjoint windows; window k estimates, window k+1 evaluates."""

    windows: np.ndarray  # (K, w)
    dropped: int

    @property
    def window_count(self) -> int:
        return int(self.windows.shape[0])

    @property
    def estimation(self) -> np.ndarray:
        return self.windows[:-1]

    @property
    def evaluation(self) -> np.ndarray:
        return self.windows[1:]


def split_windows(series, window: int) -> WindowPairing:
    """Tile the series into floor(len/window) full windows, dropping the tail."""
    values = np.asarray(getattr(series, "values", series), dtype=float)
    window = int(window)
    if window < 2:
        raise ConfigError(f"window must be at least 2, got {window}")
    count = values.size // window
    if count < 2:
        raise SizeError(
            f"series of length {values.size} cannot form an estimate/evaluate pair "
            f"with window {window} (needs at least {2 * window})"
        )
    tiled = values[: count * window].reshape(count, window)
    return WindowPairing(windows=tiled, dropped=int(values.size - count * window))


def exceedance_rate(capitals, evaluation_windows) -> float:
    """Fraction of evaluation observations with outcome + capital < 0."""
    caps = np.asarray(capitals, dtype=float)
    windows = np.asarray(evaluation_windows, dtype=float)
    if windows.ndim != 2 or caps.shape != (windows.shape[0],):
        raise DomainError(
            f"capitals {caps.shape} and evaluation windows {windows.shape} are not aligned"
        )
    return float(np.count_nonzero(windows + caps[:, None] < 0.0) / windows.size)


def bias_statistic(samples, capitals, alpha, measure: str = "var") -> float:
    """Empirical risk of the secured positions y_i = x_i + capital_i.

    ``measure`` picks the empirical functional: the type-7 VaR or the
    tail-average ES. Near zero for unbiased estimation; positive when risk is
    underestimated (the secured position still needs capital).
    """
    x = np.asarray(samples, dtype=float)
    caps = np.asarray(capitals, dtype=float)
    if x.shape != caps.shape or x.ndim != 1:
        raise DomainError(f"samples {x.shape} and capitals {caps.shape} are not aligned")
    alpha = RiskLevel(alpha)
    if x.size < 1 or math.ceil(alpha * x.size) < 1:
        raise SizeError("bias_statistic needs at least one secured observation")
    if measure not in ("var", "es"):
        raise ConfigError(f"measure must be 'var' or 'es', got {measure!r}")
    y = x + caps
    y_sorted = np.sort(y)
    quantile = float(_type7_sorted_rows(y_sorted[None, :], float(alpha))[0])
    if measure == "var":
        return -quantile
    tail = y[y < quantile]
    if tail.size == 0:
        raise EmptyTailError("no secured position falls below the empirical VaR")
    return -float(tail.mean())


def acerbi_z(var_capitals, es_capitals, evaluation_windows, alpha) -> float:
    """Acerbi-Szekely "Test 2" statistic.

    Z = 1 + (1/(K-1)) sum_k (1/w) sum_j x_j^{k+1} 1{x_j^{k+1} + VaR^k < 0} / (alpha ES^k).
    Zero under correct tail modelling, negative under risk underestimation,
    exactly 1 when no exceedance occurs.
    """
    var_caps = np.asarray(var_capitals, dtype=float)
    es_caps = np.asarray(es_capitals, dtype=float)
    windows = np.asarray(evaluation_windows, dtype=float)
    if windows.ndim != 2 or var_caps.shape != (windows.shape[0],) or es_caps.shape != var_caps.shape:
        raise DomainError("capitals and evaluation windows are not aligned")
    if np.any(es_caps <= 0.0):
        row = int(np.flatnonzero(es_caps <= 0.0)[0])
        raise DomainError(
            f"window {row}: non-positive ES capital {es_caps[row]!r}; Z statistic undefined"
        )
    alpha = RiskLevel(alpha)
    hits = windows + var_caps[:, None] < 0.0
    w = windows.shape[1]
    per_window = (windows * hits).sum(axis=1) / (w * float(alpha) * es_caps)
    return float(1.0 + per_window.mean())


def var_score(forecast, outcome, alpha):
    """Consistent quantile score S(x, y) = (1{x >= y} - alpha)(x - y).

    The forecast is the quantile, i.e. minus the VaR capital. Identically
    equal to the weighted penalty alpha*(y-x)^+ + (1-alpha)*(y-x)^-.
    """
    alpha = RiskLevel(alpha)
    x = np.asarray(forecast, dtype=float)
    y = np.asarray(outcome, dtype=float)
    score = ((x >= y).astype(float) - float(alpha)) * (x - y)
    return float(score) if score.ndim == 0 else score


def joint_var_es_score(var_forecast, es_forecast, outcome, alpha):
    """Joint VaR-ES consistent score with logistic weighting of the ES leg."""
    alpha = RiskLevel(alpha)
    x1 = np.asarray(var_forecast, dtype=float)
    x2 = np.asarray(es_forecast, dtype=float)
    y = np.asarray(outcome, dtype=float)
    ind = (x1 >= y).astype(float)
    sig = sc.expit(x2)
    score = (
        (ind - float(alpha)) * (x1 - y)
        + sig * ind * (x1 - y) / float(alpha)
        + sig * (x2 - x1)
        - sig
    )
    return float(score) if score.ndim == 0 else score


def mean_score(forecasts, evaluation_windows, alpha, score: str = "var", es_forecasts=None) -> float:
    """Double average (over windows, then observations) of a scoring function."""
    x1 = np.asarray(forecasts, dtype=float)
    windows = np.asarray(evaluation_windows, dtype=float)
    if windows.ndim != 2 or x1.shape != (windows.shape[0],):
        raise SizeError("forecasts and evaluation windows are not aligned")
    if score == "var":
        values = var_score(x1[:, None], windows, alpha)
    elif score == "joint":
        if es_forecasts is None:
            raise ConfigError("joint mean score needs es_forecasts")
        x2 = np.asarray(es_forecasts, dtype=float)
        if x2.shape != x1.shape:
            raise SizeError("es_forecasts and forecasts are not aligned")
        values = joint_var_es_score(x1[:, None], x2[:, None], windows, alpha)
    else:
        raise ConfigError(f"score must be 'var' or 'joint', got {score!r}")
    return float(values.mean(axis=1).mean())


@dataclass(frozen=True)
class MethodResult:
    """Per-method backtest statistics; absent values carry a reason."""

    method: str
    failed: bool = False
    failure: str | None = None
    exceedance_rate: float | None = None
    exceedance_count: int | None = None
    bias_statistic: float | None = None
    bias_reason: str | None = None
    es_z_statistic: float | None = None
    es_z_reason: str | None = None
    var_mean_score: float | None = None
    joint_mean_score: float | None = None


_METHOD_CSV_FIELDS = (
    "exceedance_rate",
    "exceedance_count",
    "bias_statistic",
    "es_z_statistic",
    "var_mean_score",
    "joint_mean_score",
)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class BacktestReport:
    """One series' backtest: statistics per method plus the config echo."""

    series_name: str
    config: BacktestConfig
    window_count: int
    evaluated_points: int
    methods: dict

    def to_json_dict(self) -> dict:
        return {
            "type": "backtest_report",
            "series": self.series_name,
            "config": {
                "alpha": self.config.alpha,
                "window": self.config.window,
                "measure": self.config.measure,
                "methods": list(self.config.methods),
                "gpd_threshold_quantile": self.config.gpd_threshold_quantile,
            },
            "window_count": self.window_count,
            "evaluated_points": self.evaluated_points,
            "methods": {
                tag: {
                    "failed": r.failed,
                    "failure": r.failure,
                    "exceedance_rate": r.exceedance_rate,
                    "exceedance_count": r.exceedance_count,
                    "bias_statistic": r.bias_statistic,
                    "bias_reason": r.bias_reason,
                    "es_z_statistic": r.es_z_statistic,
                    "es_z_reason": r.es_z_reason,
                    "var_mean_score": r.var_mean_score,
                    "joint_mean_score": r.joint_mean_score,
                }
                for tag, r in self.methods.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["method," + ",".join(_METHOD_CSV_FIELDS)]
        for tag in self.config.methods:
            r = self.methods[tag]
            cells = [_csv_cell(getattr(r, name)) for name in _METHOD_CSV_FIELDS]
            lines.append(tag + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def to_csv_long(self) -> str:
        lines = ["method,statistic,value"]
        for tag in self.config.methods:
            r = self.methods[tag]
            for name in _METHOD_CSV_FIELDS:
                value = getattr(r, name)
                if value is not None:
                    lines.append(f"{tag},{name},{_csv_cell(value)}")
        return "\n".join(lines) + "\n"


def rolling_backtest(series, config: BacktestConfig, table=None) -> BacktestReport:
    """Estimate on window k, evaluate on window k+1, aggregate all statistics.

    Estimator failures are recorded per method and do not abort the other
    methods. The unbiased ES method requires a calibration ``table`` entry
    for (window, alpha).
    """
    values = np.asarray(getattr(series, "values", series), dtype=float)
    name = str(getattr(series, "name", "series"))
    pairing = split_windows(values, config.window)
    est, ev = pairing.estimation, pairing.evaluation
    alpha = config.alpha
    ws = window_stats(est, with_shape="cornish_fisher" in config.methods)
    want_es = config.measure in ("es", "both")

    results: dict = {}
    for method in config.methods:
        try:
            var_caps = batch_var_capitals(
                method, ws, alpha, gpd_threshold_quantile=config.gpd_threshold_quantile
            )
            es_caps = None
            if want_es:
                es_caps = batch_es_capitals(
                    method,
                    ws,
                    alpha,
                    gpd_threshold_quantile=config.gpd_threshold_quantile,
                    table=table,
                )
        except RiskbenchError as exc:
            results[method] = MethodResult(
                method=method, failed=True, failure=f"{type(exc).__name__}: {exc}"
            )
            continue

        hits = ev + var_caps[:, None] < 0.0
        count = int(np.count_nonzero(hits))
        rate = count / ev.size

        observations = ev.ravel()
        if config.measure == "es":
            secured_caps = np.repeat(es_caps, ev.shape[1])
            bias_measure = "es"
        else:
            secured_caps = np.repeat(var_caps, ev.shape[1])
            bias_measure = "var"
        bias = bias_reason = None
        try:
            bias = bias_statistic(observations, secured_caps, alpha, measure=bias_measure)
        except EmptyTailError as exc:
            bias_reason = str(exc)

        es_z = es_z_reason = None
        joint = None
        if want_es:
            try:
                es_z = acerbi_z(var_caps, es_caps, ev, alpha)
            except DomainError as exc:
                es_z_reason = str(exc)
            joint = mean_score(-var_caps, ev, alpha, score="joint", es_forecasts=-es_caps)

        results[method] = MethodResult(
            method=method,
            exceedance_rate=rate,
            exceedance_count=count,
            bias_statistic=bias,
            bias_reason=bias_reason,
            es_z_statistic=es_z,
            es_z_reason=es_z_reason,
            var_mean_score=mean_score(-var_caps, ev, alpha, score="var"),
            joint_mean_score=joint,
        )

    return BacktestReport(
        series_name=name,
        config=config,
        window_count=pairing.window_count,
        evaluated_points=int(ev.size),
        methods=results,
    )


# ---------------------------------------------------------------------------
# replication studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodReplicationStats:
    """Across-replication summary for one method.

    RD and OR compare against the reference method and are absent for the
    reference itself. ``rd_excluded`` counts replications dropped because the
    reference exceedance rate was zero (RD undefined).
    """

    method: str
    er_mean: float | None = None
    er_sd: float | None = None
    rd_mean: float | None = None
    rd_sd: float | None = None
    or_rate: float | None = None
    rd_excluded: int = 0
    es_z_mean: float | None = None
    es_z_sd: float | None = None
    es_z_or_rate: float | None = None
    es_z_undefined: int = 0
    var_score_mean: float | None = None
    joint_score_mean: float | None = None
    failures: int = 0


_REPLICATION_CSV_FIELDS = (
    "er_mean",
    "er_sd",
    "rd_mean",
    "rd_sd",
    "or_rate",
    "es_z_mean",
    "es_z_sd",
    "es_z_or_rate",
    "var_score_mean",
    "joint_score_mean",
    "failures",
)


@dataclass(frozen=True)
class ReplicationSummary:
    """Aggregate of N independent simulated backtests."""

    config: BacktestConfig
    generator: GaussianParams
    series_length: int
    replications: int
    seed: int
    reference: str | None
    methods: dict
    samples: dict | None = field(default=None, repr=False, compare=False)

    def to_json_dict(self) -> dict:
        return {
            "type": "replication_summary",
            "config": {
                "alpha": self.config.alpha,
                "window": self.config.window,
                "measure": self.config.measure,
                "methods": list(self.config.methods),
                "gpd_threshold_quantile": self.config.gpd_threshold_quantile,
            },
            "generator": {"mu": self.generator.mu, "sigma": self.generator.sigma},
            "series_length": self.series_length,
            "replications": self.replications,
            "seed": self.seed,
            "reference": self.reference,
            "methods": {
                tag: {
                    "er_mean": s.er_mean,
                    "er_sd": s.er_sd,
                    "rd_mean": s.rd_mean,
                    "rd_sd": s.rd_sd,
                    "or_rate": s.or_rate,
                    "rd_excluded": s.rd_excluded,
                    "es_z_mean": s.es_z_mean,
                    "es_z_sd": s.es_z_sd,
                    "es_z_or_rate": s.es_z_or_rate,
                    "es_z_undefined": s.es_z_undefined,
                    "var_score_mean": s.var_score_mean,
                    "joint_score_mean": s.joint_score_mean,
                    "failures": s.failures,
                }
                for tag, s in self.methods.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["method," + ",".join(_REPLICATION_CSV_FIELDS)]
        for tag in self.config.methods:
            s = self.methods[tag]
            cells = [_csv_cell(getattr(s, name)) for name in _REPLICATION_CSV_FIELDS]
            lines.append(tag + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def to_csv_long(self) -> str:
        lines = ["method,statistic,value"]
        for tag in self.config.methods:
            s = self.methods[tag]
            for name in _REPLICATION_CSV_FIELDS:
                value = getattr(s, name)
                if value is not None:
                    lines.append(f"{tag},{name},{_csv_cell(value)}")
        return "\n".join(lines) + "\n"


def _replicate_indices(config, generator, series_length, seed, indices, table):
    """Run the backtest for each replication index; NaN marks absent values."""
    count = len(indices)
    out = {
        m: {
            "er": np.full(count, np.nan),
            "es_z": np.full(count, np.nan),
            "var_score": np.full(count, np.nan),
            "joint_score": np.full(count, np.nan),
            "failed": np.zeros(count, dtype=bool),
        }
        for m in config.methods
    }
    for pos, index in enumerate(indices):
        rng = SeededRng(seed, stream_id=index)
        values = draw_gaussian(rng, series_length, generator.mu, generator.sigma)
        report = rolling_backtest(values, config, table)
        for method, r in report.methods.items():
            slot = out[method]
            if r.failed:
                slot["failed"][pos] = True
                continue
            slot["er"][pos] = r.exceedance_rate
            if r.es_z_statistic is not None:
                slot["es_z"][pos] = r.es_z_statistic
            if r.var_mean_score is not None:
                slot["var_score"][pos] = r.var_mean_score
            if r.joint_mean_score is not None:
                slot["joint_score"][pos] = r.joint_mean_score
    return out


def _replicate_worker(payload):
    config, generator, series_length, seed, indices, table = payload
    return _replicate_indices(config, generator, series_length, seed, list(indices), table)


def _nan_stats(values: np.ndarray):
    valid = values[~np.isnan(values)]
    if valid.size == 0:
        return None, None
    mean = float(valid.mean())
    sd = float(valid.std(ddof=1)) if valid.size > 1 else 0.0
    return mean, sd


def replication_study(
    config: BacktestConfig,
    generator: GaussianParams,
    series_length: int,
    replications: int,
    seed: int,
    *,
    reference: str | None = "gaussian_unbiased",
    table=None,
    workers: int | None = None,
    keep_samples: bool = False,
) -> ReplicationSummary:
    """Simulate N series, backtest each, aggregate ER / RD / OR per method.

    Replication i draws from the stream ``(seed, stream_id=i)``, so results
    are bit-identical for a given seed no matter how work is scheduled.
    RD_i = (ER_i - ER_i(ref)) / ER_i(ref); OR_i = 1 iff the competitor's
    exceedance rate sits farther from alpha than the reference's. With an ES
    measure, the same mean/sd/outperformance aggregation is applied to the
    Acerbi-Szekely Z statistic (reference value 0).
    """
    replications = int(replications)
    if replications < 2:
        raise DomainError(f"replications must be at least 2, got {replications}")
    series_length = int(series_length)
    if series_length < 2 * config.window:
        raise SizeError(
            f"series_length {series_length} cannot host two windows of {config.window}"
        )
    if reference is not None:
        reference = canonical_method(reference)
        if reference not in config.methods:
            reference = None

    indices = np.arange(replications)
    if workers is not None and workers > 1:
        chunk_count = min(int(workers) * 4, replications)
        chunks = np.array_split(indices, chunk_count)
        payloads = [
            (config, generator, series_length, int(seed), chunk.tolist(), table)
            for chunk in chunks
            if chunk.size
        ]
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(_replicate_worker, payloads))
        merged = {
            m: {
                key: np.concatenate([p[m][key] for p in parts])
                for key in parts[0][m]
            }
            for m in config.methods
        }
    else:
        merged = _replicate_indices(config, generator, series_length, int(seed), indices.tolist(), table)

    alpha = config.alpha
    ref_er = merged[reference]["er"] if reference is not None else None
    ref_z = merged[reference]["es_z"] if reference is not None else None
    stats: dict = {}
    for method in config.methods:
        slot = merged[method]
        er_mean, er_sd = _nan_stats(slot["er"])
        z_mean, z_sd = _nan_stats(slot["es_z"])
        var_score_mean, _ = _nan_stats(slot["var_score"])
        joint_score_mean, _ = _nan_stats(slot["joint_score"])
        rd_mean = rd_sd = or_rate = None
        rd_excluded = 0
        z_or = None
        if reference is not None and method != reference:
            both = ~np.isnan(slot["er"]) & ~np.isnan(ref_er)
            usable = both & (ref_er != 0.0)
            rd_excluded = int(np.count_nonzero(both) - np.count_nonzero(usable))
            if np.any(usable):
                rd = (slot["er"][usable] - ref_er[usable]) / ref_er[usable]
                rd_mean = float(rd.mean())
                rd_sd = float(rd.std(ddof=1)) if rd.size > 1 else 0.0
            if np.any(both):
                or_rate = float(
                    np.mean(
                        np.abs(slot["er"][both] - alpha) > np.abs(ref_er[both] - alpha)
                    )
                )
            z_both = ~np.isnan(slot["es_z"]) & ~np.isnan(ref_z)
            if np.any(z_both):
                z_or = float(
                    np.mean(np.abs(slot["es_z"][z_both]) > np.abs(ref_z[z_both]))
                )
        stats[method] = MethodReplicationStats(
            method=method,
            er_mean=er_mean,
            er_sd=er_sd,
            rd_mean=rd_mean,
            rd_sd=rd_sd,
            or_rate=or_rate,
            rd_excluded=rd_excluded,
            es_z_mean=z_mean,
            es_z_sd=z_sd,
            es_z_or_rate=z_or,
            es_z_undefined=int(np.count_nonzero(np.isnan(slot["es_z"]) & ~slot["failed"]))
            if config.measure in ("es", "both")
            else 0,
            var_score_mean=var_score_mean,
            joint_score_mean=joint_score_mean,
            failures=int(np.count_nonzero(slot["failed"])),
        )

    return ReplicationSummary(
        config=config,
        generator=generator,
        series_length=series_length,
        replications=replications,
        seed=int(seed),
        reference=reference,
        methods=stats,
        samples=merged if keep_samples else None,
    )
