"""Single-chain sample diagnostics: ACF, batch-means ESS, summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooShort, ZeroVariance

MIN_ESS_LENGTH = 100
QUANTILE_LEVELS = (0.025, 0.25, 0.5, 0.75, 0.975)


@dataclass(frozen=True)
class ScalarChain:
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("a scalar chain must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"chain {self.label!r} has non-finite values")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


def _values(chain) -> np.ndarray:
    if isinstance(chain, ScalarChain):
        return chain.values
    return ScalarChain(chain).values


def acf(chain, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags ``0..max_lag``.

    Uses the biased autocovariance (divide by the chain length) over the
    lag-0 autocovariance, which keeps every ``|rho_k| <= 1``.
    """
    x = _values(chain)
    n = x.shape[0]
    if n < 2:
        raise TooShort("need at least 2 values for an autocorrelation")
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must be in [0, {n - 1}]")
    d = x - x.mean()
    c0 = d @ d
    if c0 <= 0 or c0 <= n * (np.finfo(float).eps * np.abs(x).max()) ** 2:
        raise ZeroVariance("chain is constant")
    return np.array([d[: n - k] @ d[k:] for k in range(max_lag + 1)]) / c0


def batch_means_variance(chain) -> float:
    """Long-run variance by non-overlapping batch means, batch size floor(sqrt(n))."""
    x = _values(chain)
    n = x.shape[0]
    if n < MIN_ESS_LENGTH:
        raise TooShort(f"need at least {MIN_ESS_LENGTH} values, got {n}")
    b = math.isqrt(n)
    a = n // b
    means = x[: a * b].reshape(a, b).mean(axis=1)
    return float(b * np.var(means, ddof=1))


def ess(chain) -> float:
    """Effective sample size ``n * var / sigma2_BM``, capped at ``2n``."""
    x = _values(chain)
    n = x.shape[0]
    if n < MIN_ESS_LENGTH:
        raise TooShort(f"need at least {MIN_ESS_LENGTH} values, got {n}")
    var = float(np.var(x, ddof=1))
    if var <= 0 or var <= (np.finfo(float).eps * np.abs(x).max()) ** 2:
        raise ZeroVariance("chain is constant")
    sigma2 = batch_means_variance(x)
    if sigma2 <= 0:
        return 2.0 * n
    return float(min(n * var / sigma2, 2.0 * n))


def mcse(chain) -> float:
    """Monte Carlo standard error of the chain mean (batch means)."""
    x = _values(chain)
    return math.sqrt(batch_means_variance(x) / x.shape[0])


def summarize(chain) -> dict:
    x = _values(chain)
    if x.shape[0] < 2:
        raise TooShort("need at least 2 values to summarize")
    q = np.quantile(x, QUANTILE_LEVELS)
    out = {"mean": float(x.mean()), "sd": float(x.std(ddof=1))}
    for level, value in zip(QUANTILE_LEVELS, q):
        out[f"q{100 * level:g}"] = float(value)
    return out
