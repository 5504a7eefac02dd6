"""
Statistical helpers for experiment reports: isotonic smoothing of coverage curves,
threshold crossing, bootstrap intervals, proportions and Poisson goodness of fit.
"""

import logging
import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from sklearn.isotonic import IsotonicRegression

logger = logging.getLogger(__name__)


def isotonic_fit(x: Sequence[float], y: Sequence[float], weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Non-decreasing least-squares fit of y against x"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) == 0:
        return np.zeros(0)
    model = IsotonicRegression(increasing=True, y_min=0.0, y_max=1.0, out_of_bounds='clip')
    return model.fit_transform(x, y, sample_weight=weights)


def threshold_crossing(x: Sequence[float], fitted: Sequence[float], level: float = 0.5) -> Tuple[float, bool]:
    """
    First intensity where the fitted curve reaches `level`, linearly interpolated.
    Returns (threshold, extrapolated); an unbracketed crossing is clamped to the grid end.
    """
    x = np.asarray(x, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    reached = np.flatnonzero(fitted >= level)
    if reached.size == 0:
        return float(x[-1]), True
    first = int(reached[0])
    if first == 0:
        return float(x[0]), bool(fitted[0] > level)
    x0, x1 = x[first - 1], x[first]
    y0, y1 = fitted[first - 1], fitted[first]
    if y1 == y0:
        return float(x1), False
    return float(x0 + (level - y0) * (x1 - x0) / (y1 - y0)), False


def bootstrap_threshold(x: Sequence[float], successes: Sequence[int], trials: Sequence[int],
                        resamples: int, rng: np.random.Generator, level: float = 0.5) -> Tuple[float, float]:
    """
    Percentile 95% interval of the threshold, resampling trials within every grid point.
    Resampling 0/1 outcomes with replacement is a binomial draw at the observed fraction.
    """
    x = np.asarray(x, dtype=float)
    successes = np.asarray(successes, dtype=float)
    trials = np.asarray(trials, dtype=float)
    fractions = np.divide(successes, trials, out=np.zeros_like(successes), where=trials > 0)
    estimates = np.empty(resamples)
    for b in range(resamples):
        draw = rng.binomial(trials.astype(np.int64), fractions) / np.maximum(trials, 1)
        estimates[b], _ = threshold_crossing(x, isotonic_fit(x, draw, trials), level)
    low, high = np.percentile(estimates, [2.5, 97.5])
    return float(low), float(high)


def proportion_ci(successes: int, trials: int, rng: np.random.Generator,
                  resamples: int) -> Tuple[float, float]:
    """Percentile bootstrap interval for a success fraction"""
    if trials == 0:
        return 0.0, 0.0
    fractions = rng.binomial(trials, successes / trials, size=resamples) / trials
    low, high = np.percentile(fractions, [2.5, 97.5])
    return float(low), float(high)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p = successes / trials
    denominator = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denominator
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denominator
    return max(0.0, centre - half), min(1.0, centre + half)


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials) if trials > 0 else 0.0


def mean_and_error(values: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and its standard error"""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return 0.0, 0.0
    if len(values) == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def variance_and_error(values: Sequence[float]) -> Tuple[float, float]:
    """Unbiased sample variance and its large-sample standard error"""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0, 0.0
    variance = float(values.var(ddof=1))
    fourth = float(np.mean((values - values.mean()) ** 4))
    return variance, math.sqrt(max(fourth - variance * variance, 0.0) / len(values))


def empirical_pmf(values: Sequence[int]) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    if len(values) == 0:
        return np.zeros(1)
    return np.bincount(values) / len(values)


def poisson_total_variation(values: Sequence[int], lam: float) -> float:
    """Total variation distance between the empirical law of `values` and Poisson(lam)"""
    pmf = empirical_pmf(values)
    support = np.arange(len(pmf))
    reference = stats.poisson.pmf(support, lam) if lam > 0 else (support == 0).astype(float)
    tail = stats.poisson.sf(len(pmf) - 1, lam) if lam > 0 else 0.0
    return float(0.5 * (np.abs(pmf - reference).sum() + tail))


def poisson_chisquare(values: Sequence[int], lam: float, min_expected: float = 5.0) -> Dict[str, float]:
    """Chi-squared goodness of fit against Poisson(lam), pooling sparse cells"""
    values = np.asarray(values, dtype=np.int64)
    trials = len(values)
    if trials == 0 or lam <= 0:
        return {'statistic': 0.0, 'p_value': 1.0, 'bins': 0}
    upper = int(stats.poisson.ppf(1.0 - 1e-12, lam)) + 1
    expected = trials * stats.poisson.pmf(np.arange(upper), lam)
    # pool from the left and from the right until every cell expects at least min_expected
    edges = [0]
    running = 0.0
    for k in range(upper):
        running += expected[k]
        if running >= min_expected:
            edges.append(k + 1)
            running = 0.0
    if len(edges) < 3:
        return {'statistic': 0.0, 'p_value': 1.0, 'bins': len(edges) - 1}
    edges[-1] = np.iinfo(np.int64).max
    observed = np.histogram(values, bins=np.asarray(edges, dtype=float))[0].astype(float)
    cdf = stats.poisson.cdf(np.asarray(edges[1:-1]) - 1, lam)
    probabilities = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
    result = stats.chisquare(observed, trials * probabilities)
    return {'statistic': float(result.statistic), 'p_value': float(result.pvalue), 'bins': len(observed)}


def z_score(observed: float, expected: float, error: float) -> float:
    if error == 0:
        if math.isclose(observed, expected, rel_tol=1e-12, abs_tol=1e-15):
            return 0.0
        return math.copysign(math.inf, observed - expected)
    return (observed - expected) / error
