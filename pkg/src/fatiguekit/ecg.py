"""ECG to cleaned per-window NNI series: R-peak detection, RRI outlier
removal with linear re-fill, 5-minute windowing, and quality screening.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import InputError, QualityError
from .ingest import EcgRecord

WINDOW_MS = 300_000  # fixed 5-minute analysis window
NNI_MIN_MS = 300.0
NNI_MAX_MS = 2000.0
MAX_RELATIVE_JUMP = 0.20
REFRACTORY_MS = 200.0

# quality screening defaults; the acceptance thresholds are configurable
DEFAULT_MIN_COVERAGE_S = 240.0
DEFAULT_MAX_CORRECTED_FRACTION = 0.20
DEFAULT_MIN_NNI_COUNT = 100


@dataclass(frozen=True)
class RriSeries:
    beat_times: np.ndarray  # ms
    intervals: np.ndarray  # ms; intervals[i] spans beat i -> beat i+1


@dataclass(frozen=True)
class QualityReport:
    coverage_s: float
    corrected_fraction: float
    nni_count: int


@dataclass(frozen=True)
class NniWindow:
    window_start_ms: int
    window_len_ms: int
    nni: np.ndarray
    corrected_mask: np.ndarray
    quality: QualityReport
    valid: bool


def detect_r_peaks(record: EcgRecord) -> np.ndarray:
    """Detect R-peak times (ms) with a Pan-Tompkins-style pipeline.

    Band-pass 5-15 Hz, differentiate, square, 150 ms moving integration,
    adaptive dual thresholds with search-back, then peak refinement on the
    raw signal. Output is strictly increasing with no two peaks closer
    than 200 ms.
    """
    fs = record.sample_rate_hz
    x = record.samples
    if len(x) < 10 * fs:
        raise InputError("record shorter than 10 s")

    nyq = fs / 2.0
    b, a = sps.butter(2, [5.0 / nyq, 15.0 / nyq], btype="band")
    filtered = sps.filtfilt(b, a, x)
    deriv = np.gradient(filtered)
    squared = deriv * deriv
    win = max(1, int(round(0.150 * fs)))
    integrated = sps.convolve(squared, np.ones(win) / win, mode="same")

    refractory = int(round(REFRACTORY_MS / 1000.0 * fs))
    # strict local maxima of the integrated signal
    cand = np.flatnonzero(
        (integrated[1:-1] > integrated[:-2]) & (integrated[1:-1] > integrated[2:])
    ) + 1
    if cand.size == 0:
        return np.array([])

    head = integrated[: 2 * fs]
    spki = 0.25 * float(np.max(head))
    npki = 0.5 * float(np.mean(head))
    thr1 = npki + 0.25 * (spki - npki)

    peaks = []
    last = -refractory
    for idx in cand:
        if idx - last < refractory:
            continue
        v = integrated[idx]
        if v > thr1:
            peaks.append(idx)
            last = idx
            spki = 0.125 * v + 0.875 * spki
        else:
            # search back: a skipped stretch longer than 1.5x the running RR
            # is rescanned at the lower threshold
            if len(peaks) >= 2 and v > 0.5 * thr1:
                rr = peaks[-1] - peaks[-2]
                if idx - peaks[-1] > 1.5 * rr:
                    peaks.append(idx)
                    last = idx
                    spki = 0.25 * v + 0.75 * spki
                    thr1 = npki + 0.25 * (spki - npki)
                    continue
            npki = 0.125 * v + 0.875 * npki
        thr1 = npki + 0.25 * (spki - npki)

    if not peaks:
        return np.array([])

    # refine on the raw signal: the R spike is the local max near each
    # integrated-energy peak
    half = max(1, int(round(0.080 * fs)))
    refined = []
    for p in peaks:
        lo, hi = max(0, p - half), min(len(x), p + half + 1)
        refined.append(lo + int(np.argmax(x[lo:hi])))
    refined = sorted(set(refined))

    kept = []
    for idx in refined:
        if kept and (idx - kept[-1]) < refractory:
            continue
        kept.append(idx)
    return record.start_time_ms + np.asarray(kept, dtype=np.float64) * (1000.0 / fs)


def compute_rri(beat_times) -> RriSeries:
    """Successive beat-to-beat intervals in ms."""
    beat_times = np.asarray(beat_times, dtype=np.float64)
    if len(beat_times) < 2:
        raise InputError("need at least 2 beats to form intervals")
    return RriSeries(beat_times=beat_times, intervals=np.diff(beat_times))


def clean_rri(intervals):
    """Remove outlier intervals and re-fill them by linear interpolation.

    An interval is removed iff (a) it lies outside [300, 2000] ms, or
    (b) it differs from the previous *retained* interval by more than 20%
    of that interval (the retained reference stops one ectopic beat from
    cascading). Removed positions are re-filled by linear interpolation
    between the nearest retained neighbours; runs at either end take the
    nearest retained value. Returns (nni, corrected_mask).
    """
    if isinstance(intervals, RriSeries):
        intervals = intervals.intervals
    x = np.asarray(intervals, dtype=np.float64)
    if x.size == 0:
        raise InputError("empty interval series")

    removed = np.zeros(x.size, dtype=bool)
    last_retained = None
    for i, v in enumerate(x):
        if not NNI_MIN_MS <= v <= NNI_MAX_MS:
            removed[i] = True
        elif last_retained is not None and abs(v - last_retained) > MAX_RELATIVE_JUMP * last_retained:
            removed[i] = True
        else:
            last_retained = v
    if removed.all():
        raise QualityError("every interval removed; window unsalvageable")

    nni = x.copy()
    if removed.any():
        keep_idx = np.flatnonzero(~removed)
        nni[removed] = np.interp(np.flatnonzero(removed), keep_idx, x[keep_idx])
    return nni, removed


def assess_quality(nni, corrected_mask,
                   min_coverage_s=DEFAULT_MIN_COVERAGE_S,
                   max_corrected_fraction=DEFAULT_MAX_CORRECTED_FRACTION,
                   min_nni_count=DEFAULT_MIN_NNI_COUNT):
    """Quality report plus the keep/drop verdict for one cleaned window."""
    coverage_s = float(np.sum(nni)) / 1000.0
    frac = float(np.mean(corrected_mask)) if len(corrected_mask) else 1.0
    count = int(len(nni))
    report = QualityReport(coverage_s=coverage_s, corrected_fraction=frac, nni_count=count)
    valid = (
        coverage_s >= min_coverage_s
        and frac <= max_corrected_fraction
        and count >= min_nni_count
    )
    return report, valid


def window_ecg(record: EcgRecord, segment_start_ms, segment_end_ms,
               min_coverage_s=DEFAULT_MIN_COVERAGE_S,
               max_corrected_fraction=DEFAULT_MAX_CORRECTED_FRACTION,
               min_nni_count=DEFAULT_MIN_NNI_COUNT):
    """Cut a record into consecutive 5-min windows aligned to the segment
    start and run detect -> RRI -> clean -> quality on each.

    Only windows fully covered by both the segment and the record are
    produced; a window whose cleaning fails outright comes back invalid.
    """
    fs = record.sample_rate_hz
    rec_start, rec_end = record.start_time_ms, record.end_time_ms
    if rec_end <= segment_start_ms or rec_start >= segment_end_ms:
        return []

    windows = []
    w = segment_start_ms
    while w + WINDOW_MS <= segment_end_ms:
        if w >= rec_start and w + WINDOW_MS <= rec_end:
            i0 = int(round((w - rec_start) * fs / 1000.0))
            i1 = int(round((w + WINDOW_MS - rec_start) * fs / 1000.0))
            chunk = EcgRecord(record.subject_id, int(w), fs, record.samples[i0:i1])
            windows.append(_process_window(
                chunk, int(w),
                min_coverage_s, max_corrected_fraction, min_nni_count,
            ))
        w += WINDOW_MS
    return windows


def _process_window(chunk, window_start_ms, min_coverage_s, max_corrected_fraction, min_nni_count):
    try:
        beats = detect_r_peaks(chunk)
        rri = compute_rri(beats)
        nni, mask = clean_rri(rri.intervals)
    except (InputError, QualityError):
        report = QualityReport(coverage_s=0.0, corrected_fraction=1.0, nni_count=0)
        return NniWindow(window_start_ms, WINDOW_MS, np.array([]), np.array([], dtype=bool),
                         report, False)
    report, valid = assess_quality(nni, mask, min_coverage_s, max_corrected_fraction, min_nni_count)
    return NniWindow(window_start_ms, WINDOW_MS, nni, mask, report, valid)


def dump_window_csv(window: NniWindow, path):
    """Debug dump: one row per NNI with its cumulative time offset."""
    t = window.window_start_ms + np.concatenate([[0.0], np.cumsum(window.nni)[:-1]])
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("t_ms,nni_ms,corrected\n")
        for ti, vi, ci in zip(t, window.nni, window.corrected_mask):
            f.write(f"{ti!r},{vi!r},{int(ci)}\n")
