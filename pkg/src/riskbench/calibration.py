"""Monte Carlo calibration of the unbiased Expected Shortfall constant.

The unbiased Gaussian ES estimator is ``-mean - sd * a_n`` where ``a_n < 0``
solves the pivotal condition ES_alpha(Z + b_n * V_n) = 0 with Z standard
normal, V_n chi_{n-1} and ``a_n = -b_n * sqrt((n-1)(n+1)/n)``. The condition
is solved by bisection on one fixed Monte Carlo sample (common random
numbers), which makes the objective monotone and the result bit-reproducible.

This module also hosts the Monte Carlo verification utilities for the
defining unbiasedness properties: the exceedance frequency of secured
positions for VaR and the empirical ES of secured positions for ES.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CalibrationFailureError,
    CalibrationMissingError,
    DataError,
    DomainError,
    SizeError,
)
from .estimators import (
    GaussianParams,
    RiskLevel,
    batch_es_capitals,
    batch_var_capitals,
    canonical_method,
    window_stats,
)
from .stats_core import SeededRng, draw_pivotal_pair, draw_pivotal_pairs

TABLE_FORMAT_VERSION = 1
DEFAULT_MC_SAMPLES = 10_000_000
DEFAULT_TOLERANCE = 1e-4
_BISECTION_WIDTH = 1e-8
_MAX_DOUBLINGS = 60
_ALPHA_KEY_SCALE = 1_000_000


@dataclass(frozen=True)
class PivotalDraw:
    """One draw of the pivotal pair (Z, V_n)."""

    z: float
    v: float

    def __post_init__(self):
        if self.v < 0.0:
            raise DomainError(f"chi draw must be non-negative, got {self.v!r}")

    @classmethod
    def from_rng(cls, rng: SeededRng, n: int) -> "PivotalDraw":
        z, v = draw_pivotal_pair(rng, n)
        return cls(z, v)


@dataclass(frozen=True)
class CalibrationEntry:
    """Solution (a_n, b_n) of the unbiased-ES condition for one (n, alpha)."""

    n: int
    alpha: float
    b_n: float
    a_n: float
    mc_samples: int
    seed: int
    residual: float

    def __post_init__(self):
        if self.b_n <= 0.0:
            raise DomainError(f"b_n must be positive, got {self.b_n!r}")
        if self.a_n >= 0.0:
            raise DomainError(f"a_n must be negative, got {self.a_n!r}")
        slack = self.a_n * math.sqrt(self.n / ((self.n - 1) * (self.n + 1))) + self.b_n
        if abs(slack) > 1e-12:
            raise DataError(f"a_n and b_n are inconsistent (slack {slack:.3e})")
        if not (math.isfinite(self.residual) and self.residual >= 0.0):
            raise DataError(f"residual must be a non-negative real, got {self.residual!r}")


def _alpha_key(alpha: float) -> int:
    return int(round(float(alpha) * _ALPHA_KEY_SCALE))


@dataclass
class CalibrationTable:
    """Lookup table of calibration entries keyed by (n, alpha @ 1e-6).

    Lookups are exact-match only: a_n varies sharply in n at small n, so no
    interpolation is offered.
    """

    entries: dict = field(default_factory=dict)
    version: int = TABLE_FORMAT_VERSION

    @staticmethod
    def key(n: int, alpha: float) -> tuple[int, int]:
        return int(n), _alpha_key(alpha)

    def add(self, entry: CalibrationEntry) -> None:
        self.entries[self.key(entry.n, entry.alpha)] = entry

    def lookup(self, n: int, alpha: float) -> CalibrationEntry:
        try:
            return self.entries[self.key(n, alpha)]
        except KeyError:
            raise CalibrationMissingError(
                f"no calibration entry for (n={n}, alpha={float(alpha):.6g}); "
                "run `riskbench calibrate` or enable on-demand calibration"
            ) from None

    def ensure(
        self,
        n: int,
        alpha: float,
        mc_samples: int = DEFAULT_MC_SAMPLES,
        seed: int = 0,
        tolerance: float = DEFAULT_TOLERANCE,
    ) -> CalibrationEntry:
        """Return the stored entry, solving and storing it first if missing."""
        key = self.key(n, alpha)
        if key not in self.entries:
            self.add(solve_unbiased_es_constant(n, alpha, mc_samples, seed, tolerance))
        return self.entries[key]

    def to_json(self) -> str:
        records = [
            {
                "n": e.n,
                "alpha": e.alpha,
                "a_n": e.a_n,
                "b_n": e.b_n,
                "mc_samples": e.mc_samples,
                "seed": e.seed,
                "residual": e.residual,
            }
            for _, e in sorted(self.entries.items())
        ]
        return json.dumps({"version": self.version, "entries": records}, indent=2, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CalibrationTable":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        version = payload.get("version")
        if version != TABLE_FORMAT_VERSION:
            raise DataError(f"unsupported calibration table version {version!r}")
        table = cls(version=version)
        for rec in payload["entries"]:
            table.add(
                CalibrationEntry(
                    n=int(rec["n"]),
                    alpha=float(rec["alpha"]),
                    b_n=float(rec["b_n"]),
                    a_n=float(rec["a_n"]),
                    mc_samples=int(rec["mc_samples"]),
                    seed=int(rec["seed"]),
                    residual=float(rec["residual"]),
                )
            )
        return table

    @classmethod
    def load_or_new(cls, path) -> "CalibrationTable":
        if path is not None and os.path.exists(path):
            return cls.load(path)
        return cls()


def empirical_es(values, alpha) -> float:
    """Negative mean of the ceil(alpha * m) smallest values.

    This is the lower-tail average used as the Monte Carlo oracle for the
    expected-shortfall condition; ties are resolved by taking exactly
    ceil(alpha * m) order statistics.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise SizeError("empirical_es needs a non-empty sample")
    alpha = RiskLevel(alpha)
    # guard against p*m landing an ulp above an integer
    tail = int(math.ceil(alpha * arr.size - 1e-9))
    tail = min(max(tail, 1), arr.size)
    if tail == arr.size:
        return -float(arr.mean())
    return -float(np.partition(arr, tail - 1)[:tail].mean())


def solve_unbiased_es_constant(
    n: int,
    alpha,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> CalibrationEntry:
    """Bisection for b_n with ES_alpha(Z + b_n V_n) = 0 on one fixed MC sample.

    The sample is drawn once from ``SeededRng(seed)``; the objective
    g(b) = empirical_es(z + b*v) is then monotone non-increasing in b, so the
    bisection terminates deterministically. Stops when the bracket is below
    1e-8 or |g| falls below ``tolerance``, whichever comes first.
    """
    n = int(n)
    if n < 2:
        raise SizeError(f"calibration needs window size n >= 2, got {n}")
    mc_samples = int(mc_samples)
    if mc_samples < 100_000:
        raise DomainError(f"mc_samples must be at least 1e5, got {mc_samples}")
    alpha = RiskLevel(alpha)
    if not tolerance > 0.0:
        raise DomainError(f"tolerance must be positive, got {tolerance!r}")

    z, v = draw_pivotal_pairs(SeededRng(int(seed)), n, mc_samples)
    tail = int(math.ceil(alpha * mc_samples - 1e-9))
    tail = min(max(tail, 1), mc_samples)

    def g(b: float) -> float:
        y = z + b * v
        if tail == mc_samples:
            return -float(y.mean())
        return -float(np.partition(y, tail - 1)[:tail].mean())

    if g(0.0) <= 0.0:
        raise CalibrationFailureError(
            "empirical ES at b = 0 is already non-positive; no positive root exists"
        )
    hi = 1.0
    for _ in range(_MAX_DOUBLINGS):
        if g(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise CalibrationFailureError(
            f"could not bracket the root within {_MAX_DOUBLINGS} doublings"
        )

    lo = 0.0
    b = 0.5 * hi
    residual = abs(g(b))
    while hi - lo > _BISECTION_WIDTH:
        b = 0.5 * (lo + hi)
        gb = g(b)
        residual = abs(gb)
        if residual <= tolerance:
            break
        if gb < 0.0:
            hi = b
        else:
            lo = b

    a_n = -b * math.sqrt((n - 1) * (n + 1) / n)
    return CalibrationEntry(
        n=n,
        alpha=float(alpha),
        b_n=float(b),
        a_n=float(a_n),
        mc_samples=mc_samples,
        seed=int(seed),
        residual=float(residual),
    )


@dataclass(frozen=True)
class ExceedanceCheck:
    """Monte Carlo exceedance frequency of secured positions."""

    method: str
    n: int
    alpha: float
    trials: int
    exceedances: int
    frequency: float
    standard_error: float


def _simulated_secured_positions(method, n, alpha, trials, seed, params, measure, table):
    """Stream x_out + capital over ``trials`` simulated estimation windows."""
    method = canonical_method(method)
    n = int(n)
    if n < 2:
        raise SizeError(f"simulation needs window size n >= 2, got {n}")
    trials = int(trials)
    if trials < 10_000:
        raise DomainError(f"trials must be at least 1e4, got {trials}")
    alpha = RiskLevel(alpha)
    if params is None:
        params = GaussianParams(0.0, 1.0)

    gen = SeededRng(int(seed)).generator()
    chunk_rows = max(1, 4_000_000 // (n + 1))
    out = np.empty(trials)
    done = 0
    with_shape = method == "cornish_fisher"
    while done < trials:
        rows = min(chunk_rows, trials - done)
        draws = gen.normal(params.mu, params.sigma, (rows, n + 1))
        ws = window_stats(draws[:, :n], with_shape=with_shape)
        if measure == "var":
            caps = batch_var_capitals(method, ws, alpha)
        else:
            caps = batch_es_capitals(method, ws, alpha, table=table)
        out[done : done + rows] = draws[:, n] + caps
        done += rows
    return out


def pivotality_check(method, n, alpha, trials, seed, params=None) -> ExceedanceCheck:
    """MC frequency of {X_out + VaR capital < 0} over simulated Gaussian windows.

    For an unbiased estimator the frequency equals alpha up to Monte Carlo
    noise, for any (mu, sigma); the reported standard error is
    sqrt(p(1-p)/trials).
    """
    secured = _simulated_secured_positions(method, n, alpha, trials, seed, params, "var", None)
    exceed = int(np.count_nonzero(secured < 0.0))
    freq = exceed / secured.size
    se = math.sqrt(max(freq * (1.0 - freq), 1e-300) / secured.size)
    return ExceedanceCheck(
        method=canonical_method(method),
        n=int(n),
        alpha=float(RiskLevel(alpha)),
        trials=secured.size,
        exceedances=exceed,
        frequency=freq,
        standard_error=se,
    )


def secured_position_es(method, n, alpha, trials, seed, params=None, table=None) -> float:
    """Empirical ES of {X_out + ES capital} — the defining unbiasedness quantity.

    Near zero for an unbiased ES estimator; strictly positive when risk is
    systematically underestimated.
    """
    secured = _simulated_secured_positions(method, n, alpha, trials, seed, params, "es", table)
    return empirical_es(secured, alpha)
