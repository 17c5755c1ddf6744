import numpy as np
import pytest
from scipy import stats as sps

from gmc_lab.stats import (StatsError, batch_means_se, correlation_and_se, covariance_and_se, mean_and_se,
                           stats_fit_exponent, stats_ks_test, variance_and_se)


def test_fit_exact_power_law():
    k = np.arange(3, 9)
    fit = stats_fit_exponent(k, 5 * 2.0 ** (-1.5 * k))
    assert fit.slope == pytest.approx(-1.5, abs=1e-12)
    assert fit.ci_halfwidth == pytest.approx(0.0, abs=1e-10)
    assert fit.to_dict()["slope"] == fit.slope


def test_fit_ci_covers_truth_mostly():
    rng = np.random.default_rng(0)
    k = np.arange(3, 9)
    hits = 0
    for _ in range(200):
        v = 2.0 ** (-k + 0.1 * rng.standard_normal(k.size))
        f = stats_fit_exponent(k, v)
        hits += abs(f.slope + 1) <= f.ci_halfwidth
    assert 0.9 <= hits / 200 <= 0.99


def test_fit_errors():
    with pytest.raises(StatsError):
        stats_fit_exponent([1, 2, 3], [1, 2, 3])
    with pytest.raises(StatsError):
        stats_fit_exponent([1, 2, 3, 4], [1, 0, 1, 1])


def test_ks():
    rng = np.random.default_rng(1)
    _, p = stats_ks_test(rng.standard_normal(2000), sps.norm.cdf)
    assert p > 0.01
    _, p = stats_ks_test(rng.standard_normal(2000) + 0.3, sps.norm.cdf)
    assert p < 1e-6
    with pytest.raises(StatsError):
        stats_ks_test(np.zeros(99), sps.norm.cdf)


def test_moment_ses():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(100000)
    m, se = mean_and_se(x)
    assert se == pytest.approx(1 / np.sqrt(1e5), rel=0.02)
    v, sev = variance_and_se(x)
    assert sev == pytest.approx(np.sqrt(2 / 1e5), rel=0.05)
    y = 0.5 * x + rng.standard_normal(x.size)
    c, sec = covariance_and_se(x, y)
    assert abs(c - 0.5) < 4 * sec
    r, ser = correlation_and_se(x, rng.standard_normal(x.size))
    assert abs(r) < 4 * ser
    assert batch_means_se(x) == pytest.approx(se, rel=0.5)
