"""Small statistics toolkit shared by the studies."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    ci_halfwidth: float
    stderr: float
    heteroskedastic: bool

    def to_dict(self) -> dict:
        return asdict(self)


def stats_fit_exponent(k, values, level: float = 0.95) -> ExponentFit:
    """OLS of ``log2(values)`` on ``k`` with a t-interval for the slope."""
    k = np.asarray(k, dtype=float)
    v = np.asarray(values, dtype=float)
    if k.size != v.size or k.size < 4:
        raise StatsError("need at least 4 (k, value) pairs")
    if np.any(~(v > 0)):
        raise StatsError("values must be positive")
    y = np.log2(v)
    res = stats.linregress(k, y)
    resid = y - (res.intercept + res.slope * k)
    dof = k.size - 2
    ci = float(stats.t.ppf(0.5 + level / 2, dof) * res.stderr)
    hetero = False
    if np.ptp(resid) > 1e-12:
        rho = stats.spearmanr(k, np.abs(resid)).statistic
        hetero = bool(abs(rho) > 0.9)
        if hetero:
            warnings.warn("residual magnitude trends with k", RuntimeWarning, stacklevel=2)
    return ExponentFit(float(res.slope), float(res.intercept), ci, float(res.stderr), hetero)


def stats_ks_test(samples, cdf) -> tuple[float, float]:
    """One-sample KS statistic and asymptotic p-value."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise StatsError("KS test needs at least 100 samples")
    r = stats.kstest(x, cdf, method="asymp")
    return float(r.statistic), float(r.pvalue)


def mean_and_se(x, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    return x.mean(axis=axis), x.std(axis=axis, ddof=1) / np.sqrt(n)


def variance_and_se(x, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Sample variance and its standard error from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    c = x - x.mean(axis=axis, keepdims=True)
    m2 = np.mean(c**2, axis=axis)
    m4 = np.mean(c**4, axis=axis)
    var = m2 * n / (n - 1)
    return var, np.sqrt(np.maximum(m4 - m2**2, 0) / n)


def covariance_and_se(x, y) -> tuple[float, float]:
    x = np.asarray(x, float) - np.mean(x)
    y = np.asarray(y, float) - np.mean(y)
    p = x * y
    n = p.size
    return float(p.sum() / (n - 1)), float(p.std(ddof=1) / np.sqrt(n))


def correlation_and_se(x, y) -> tuple[float, float]:
    """Sample correlation and its null standard error ``1/sqrt(n)``."""
    r = float(np.corrcoef(x, y)[0, 1])
    return r, 1.0 / np.sqrt(len(x))


def batch_means_se(x, n_batches: int = 20) -> float:
    """Standard error of a statistic's mean from contiguous batch means."""
    x = np.asarray(x, float)
    b = np.array_split(x, n_batches)
    m = np.array([bb.mean() for bb in b])
    return float(m.std(ddof=1) / np.sqrt(n_batches))
