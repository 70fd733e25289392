"""Small interval-estimation helpers shared by the estimators."""

from __future__ import annotations

import math

import numpy as np

Z95 = 1.959963984540054


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion ``k / n``."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # the exact endpoints at k = 0 and k = n are lost to roundoff otherwise
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def binomial_stderr(k: int, n: int) -> float:
    p = k / n
    return math.sqrt(p * (1 - p) / n)


def ratio_interval(k_num: int, n_num: int, k_den: int, n_den: int, z: float = Z95):
    """Delta-method interval for ``(k_num/n_num) / (k_den/n_den)``.

    Numerator and denominator must come from independent samples.
    Returns ``(ratio, lo, hi)``; ``ratio`` is nan when the denominator is 0.
    """
    if k_den == 0:
        return math.nan, math.nan, math.nan
    p_num = k_num / n_num
    p_den = k_den / n_den
    r = p_num / p_den
    if k_num == 0:
        return 0.0, 0.0, wilson_interval(0, n_num, z)[1] / p_den
    rel2 = (1 - p_num) / (n_num * p_num) + (1 - p_den) / (n_den * p_den)
    half = z * r * math.sqrt(rel2)
    return r, max(0.0, r - half), r + half


def median_of_means(values: np.ndarray, blocks: int = 16) -> tuple[float, float]:
    """Median-of-means point estimate and a robust standard error.

    The spread is the scaled MAD of block means divided by sqrt(blocks).
    """
    values = np.asarray(values, dtype=float)
    chunks = np.array_split(values, blocks)
    means = np.array([c.mean() for c in chunks if c.size])
    mad = np.median(np.abs(means - np.median(means))) * 1.4826
    return float(np.median(means)), float(mad / math.sqrt(means.size))
