"""Collapse a T x D feature sequence into 11 descriptive statistics per
dimension, the interpretable path's fixed-width representation."""

from __future__ import annotations

import numpy as np

from .acti import _moments
from .errors import InputError

STAT_SUFFIXES = ["p10", "p25", "p50", "p75", "p90", "mean", "min", "max", "std", "skew", "kurt"]
N_STATS = len(STAT_SUFFIXES)


def highlevel_names(feature_names):
    """11*D generated names, dimension-major, e.g. ``vlf__p75``."""
    return [f"{base}__{s}" for base in feature_names for s in STAT_SUFFIXES]


def descriptive_stats(X):
    """11*D vector: per input dimension [p10, p25, p50, p75, p90, mean, min,
    max, std, skewness, kurtosis].

    Percentiles interpolate linearly between closest order statistics; std is
    the population value; zero-variance dimensions get skew = kurt = 0.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InputError("descriptive stats need a T x D matrix with T >= 2")
    t, d = X.shape
    out = np.empty(N_STATS * d)
    pcts = np.percentile(X, [10, 25, 50, 75, 90], axis=0)  # linear interpolation
    for j in range(d):
        col = X[:, j]
        skew, kurt = _moments(col)
        out[j * N_STATS:(j + 1) * N_STATS] = [
            pcts[0, j], pcts[1, j], pcts[2, j], pcts[3, j], pcts[4, j],
            np.mean(col), np.min(col), np.max(col), np.std(col),
            skew, kurt,
        ]
    return out
