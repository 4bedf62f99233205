"""Small statistical helpers shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

# spawn-key tag for bootstrap streams, disjoint from the walker's tags
BOOT = 9
N_RESAMPLES = 200


@dataclass(frozen=True)
class EstimateCI:
    value: float
    std_error: float
    sample_count: int
    method: str
    seed: int
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError(f"std_error must be >= 0, got {self.std_error}")

    def record(self, estimator: str, config_hash: str = "") -> dict:
        return {
            "estimator": estimator,
            "config_hash": config_hash,
            "method": self.method,
            "value": self.value,
            "std_error": self.std_error,
            "n": self.sample_count,
            "seed": self.seed,
        }


def stream_rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(BOOT, *tags))))


def bootstrap_se(data, seed: int, tag: int = 0, statistic=np.mean) -> float:
    """Percentile-bootstrap standard error of ``statistic`` (200 resamples)."""
    data = np.asarray(data, dtype=float)
    if len(data) < 2 or np.all(data == data[0]):
        return 0.0
    res = stats.bootstrap(
        (data,), statistic, n_resamples=N_RESAMPLES, method="percentile",
        random_state=stream_rng(seed, tag), batch=20,
    )
    return float(res.standard_error)


def bootstrap_se_indexed(n: int, statistic, seed: int, tag: int = 0) -> float:
    """Bootstrap over row indices ``0..n-1`` for statistics of paired data."""
    if n < 2:
        return 0.0
    res = stats.bootstrap(
        (np.arange(n),), statistic, n_resamples=N_RESAMPLES, method="percentile",
        random_state=stream_rng(seed, tag), vectorized=False,
    )
    se = float(res.standard_error)
    return 0.0 if not math.isfinite(se) else se


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``(slope, intercept, r_squared)``; r² is 1 for a flat exact fit."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    res = stats.linregress(x, y)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else float(res.rvalue ** 2)
    return float(res.slope), float(res.intercept), r2


def mann_kendall(values) -> tuple[float, float]:
    """Kendall tau of ``values`` against their order, one-sided p for an upward trend."""
    values = np.asarray(values, dtype=float)
    if len(values) < 3 or np.all(values == values[0]):
        return 0.0, 1.0
    res = stats.kendalltau(np.arange(len(values)), values, alternative="greater")
    return float(res.statistic), float(res.pvalue)


def slope_trend_p(x, y) -> tuple[float, float]:
    """Regression slope and its two-sided p-value; a flat series has p = 1."""
    y = np.asarray(y, dtype=float)
    if len(y) < 3 or np.all(y == y[0]):
        return 0.0, 1.0
    res = stats.linregress(np.asarray(x, dtype=float), y)
    p = float(res.pvalue)
    return float(res.slope), (1.0 if not math.isfinite(p) else p)


@dataclass(frozen=True)
class ProportionCI:
    value: float
    lo: float
    hi: float
    successes: int
    n: int
    level: float
    unresolved: int = 0


def clopper_pearson(successes: int, n: int, level: float = 0.99, unresolved: int = 0) -> ProportionCI:
    if n <= 0:
        raise ValueError("need at least one trial")
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=level, method="exact")
    return ProportionCI(successes / n, float(ci.low), float(ci.high), successes, n, level, unresolved)
