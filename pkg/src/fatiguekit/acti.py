"""Actigraphy-count processing: non-wear detection and per-window statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .ingest import EPOCH_MS, CountsRecord

EPOCHS_PER_WINDOW = 10  # 5 minutes of 30 s epochs
EPOCHS_PER_MIN = 2

ACTI_FEATURE_NAMES = [
    "acti_mean", "acti_median", "acti_std", "acti_var",
    "acti_min", "acti_max", "acti_skew", "acti_kurt",
]

DEFAULT_NONWEAR_MIN_DURATION_MIN = 60
DEFAULT_NONWEAR_SPIKE_TOLERANCE_MIN = 2
DEFAULT_NONWEAR_SPIKE_MAX_PER_MIN = 100


@dataclass(frozen=True)
class ActiWindow:
    window_start_ms: int
    epoch_counts: np.ndarray  # exactly 10 epochs
    wear: bool
    features: np.ndarray | None  # 8 statistics, None when not fully worn


def detect_nonwear(record: CountsRecord,
                   min_duration_min=DEFAULT_NONWEAR_MIN_DURATION_MIN,
                   spike_tolerance_min=DEFAULT_NONWEAR_SPIKE_TOLERANCE_MIN,
                   spike_max_per_min=DEFAULT_NONWEAR_SPIKE_MAX_PER_MIN):
    """Per-epoch wear mask (True = worn), Troiano-style.

    An epoch is non-wear iff it sits in a run of at least
    ``min_duration_min`` minutes of zero counts, where the run may absorb up
    to ``spike_tolerance_min`` interior minutes of activity as long as each
    spike epoch stays under ``spike_max_per_min`` counts/min.
    """
    counts = record.counts
    n = counts.size
    min_run = min_duration_min * EPOCHS_PER_MIN
    max_spikes = spike_tolerance_min * EPOCHS_PER_MIN
    spike_cap = spike_max_per_min / (60_000 / EPOCH_MS)  # counts per epoch

    zero = counts == 0
    small = (counts > 0) & (counts < spike_cap)
    nonwear = np.zeros(n, dtype=bool)

    i = 0
    while i < n:
        if not (zero[i] or small[i]):
            i += 1
            continue
        j = i
        while j < n and (zero[j] or small[j]):
            j += 1
        # interruptions must be interior: trim spike epochs at the edges
        a, b = i, j
        while a < b and small[a]:
            a += 1
        while b > a and small[b - 1]:
            b -= 1
        if b - a >= min_run:
            if int(np.sum(small[a:b])) <= max_spikes:
                nonwear[a:b] = True
            else:
                # too many interruptions: only the pure zero runs can qualify
                k = a
                while k < b:
                    if zero[k]:
                        m = k
                        while m < b and zero[m]:
                            m += 1
                        if m - k >= min_run:
                            nonwear[k:m] = True
                        k = m
                    else:
                        k += 1
        i = j
    return ~nonwear


def _moments(x):
    """Population skewness and excess kurtosis; both 0 for zero variance."""
    x = np.asarray(x, dtype=np.float64)
    m = np.mean(x)
    c = x - m
    m2 = np.mean(c * c)
    if m2 == 0.0:
        return 0.0, 0.0
    skew = np.mean(c**3) / m2**1.5
    kurt = np.mean(c**4) / m2**2 - 3.0
    return float(skew), float(kurt)


def window_stats(window_counts):
    """[mean, median, std, variance, min, max, skewness, kurtosis] of one window."""
    x = np.asarray(window_counts, dtype=np.float64)
    if x.size != EPOCHS_PER_WINDOW:
        raise InputError(f"a window holds exactly {EPOCHS_PER_WINDOW} epochs, got {x.size}")
    std = float(np.std(x))
    skew, kurt = _moments(x)
    return np.array([
        float(np.mean(x)),
        float(np.median(x)),
        std,
        std * std,
        float(np.min(x)),
        float(np.max(x)),
        skew,
        kurt,
    ])


def window_counts(record: CountsRecord, wear_mask, segment_start_ms, segment_end_ms):
    """Slice a counts record into 5-min windows on the segment grid.

    A window is produced when all 10 of its epochs are present; it carries
    features only when every epoch is wear time.
    """
    starts = record.epoch_start_times
    windows = []
    w = segment_start_ms
    while w + EPOCHS_PER_WINDOW * EPOCH_MS <= segment_end_ms:
        in_slot = np.flatnonzero((starts >= w) & (starts < w + EPOCHS_PER_WINDOW * EPOCH_MS))
        if in_slot.size == EPOCHS_PER_WINDOW:
            ec = record.counts[in_slot]
            worn = bool(np.all(wear_mask[in_slot]))
            feats = window_stats(ec) if worn else None
            windows.append(ActiWindow(int(w), ec, worn, feats))
        w += EPOCHS_PER_WINDOW * EPOCH_MS
    return windows
