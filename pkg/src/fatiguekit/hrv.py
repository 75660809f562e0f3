"""30 HRV features over one valid NNI window, in four domains.

Conventions used throughout (documented in docs/hrv_features.md):
population standard deviations, strict inequalities for NN20/NN50,
pNN denominators = number of successive pairs, NaN as the missing-value
marker wherever a ratio's denominator is zero.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sps
from scipy.integrate import trapezoid

from .errors import InputError
from .ecg import NniWindow

HRV_FEATURE_NAMES = [
    "min_hr", "max_hr", "mean_hr", "std_hr",
    "sdsd", "sdnn", "nn_mean", "nn20", "nn50", "pnn50", "pnn20",
    "rmssd", "median_nn", "range_nn", "cvsd", "cv_nni",
    "total_power", "lf", "hf", "vlf", "lf_hf", "lf_norm", "hf_norm",
    "csi", "csi_mod", "sd1", "sd2", "sd1_sd2", "cvi",
    "triangular_index",
]

VLF_BAND = (0.003, 0.04)
LF_BAND = (0.04, 0.15)
HF_BAND = (0.15, 0.40)

RESAMPLE_HZ = 4.0
WELCH_NPERSEG = 256
TRI_BIN_WIDTH_MS = 7.8125  # 1/128 s histogram bins, aligned at 0


def time_domain(nni):
    """16 time-domain statistics of an NNI series (ms)."""
    x = np.asarray(nni, dtype=np.float64)
    if x.size < 2:
        raise InputError("time-domain features need >= 2 NNIs")
    hr = 60000.0 / x
    d = np.diff(x)
    nn_mean = float(np.mean(x))
    sdnn = float(np.std(x))
    sdsd = float(np.std(d))
    rmssd = float(np.sqrt(np.mean(d * d)))
    nn20 = int(np.sum(np.abs(d) > 20.0))
    nn50 = int(np.sum(np.abs(d) > 50.0))
    return np.array([
        float(np.min(hr)),
        float(np.max(hr)),
        float(np.mean(hr)),
        float(np.std(hr)),
        sdsd,
        sdnn,
        nn_mean,
        float(nn20),
        float(nn50),
        nn50 / d.size,
        nn20 / d.size,
        rmssd,
        float(np.median(x)),
        float(np.max(x) - np.min(x)),
        rmssd / nn_mean,
        sdnn / nn_mean,
    ])


def frequency_domain(nni, beat_times=None):
    """7 spectral features of the NNI tachogram.

    The tachogram is resampled to a uniform 4 Hz grid by linear
    interpolation, mean-removed, and fed to Welch (Hann window, 256-sample
    segments, 50% overlap). Band powers integrate the one-sided PSD by the
    trapezoid rule over VLF [0.003, 0.04), LF [0.04, 0.15), HF [0.15, 0.40).
    Ratios with a zero denominator come back NaN.
    """
    x = np.asarray(nni, dtype=np.float64)
    if beat_times is None:
        t_ms = np.cumsum(x)
    else:
        beat_times = np.asarray(beat_times, dtype=np.float64)
        if len(beat_times) != len(x) + 1:
            raise InputError("beat_times must have one more entry than nni")
        t_ms = beat_times[1:] - beat_times[0]
    if x.size < 2 or (t_ms[-1] - t_ms[0]) < 60_000.0:
        raise InputError("frequency-domain features need >= 2 NNIs spanning >= 60 s")

    t_s = t_ms / 1000.0
    grid = np.arange(t_s[0], t_s[-1], 1.0 / RESAMPLE_HZ)
    tach = np.interp(grid, t_s, x)
    tach = tach - np.mean(tach)
    nperseg = min(WELCH_NPERSEG, tach.size)
    freqs, psd = sps.welch(
        tach, fs=RESAMPLE_HZ, window="hann",
        nperseg=nperseg, noverlap=nperseg // 2, detrend=False,
    )

    def band_power(lo, hi):
        m = (freqs >= lo) & (freqs < hi)
        if np.count_nonzero(m) < 2:
            return 0.0
        return float(trapezoid(psd[m], freqs[m]))

    vlf = band_power(*VLF_BAND)
    lf = band_power(*LF_BAND)
    hf = band_power(*HF_BAND)
    total = vlf + lf + hf
    lf_hf = lf / hf if hf > 0 else np.nan
    lf_norm = lf / total if total > 0 else np.nan
    hf_norm = hf / total if total > 0 else np.nan
    return np.array([total, lf, hf, vlf, lf_hf, lf_norm, hf_norm])


def nonlinear_domain(nni):
    """6 Poincare-plot features; ratios over sd1 = 0 are NaN."""
    x = np.asarray(nni, dtype=np.float64)
    if x.size < 3:
        raise InputError("nonlinear features need >= 3 NNIs")
    sdnn = float(np.std(x))
    sdsd = float(np.std(np.diff(x)))
    sd1 = np.sqrt(0.5) * sdsd
    sd2 = float(np.sqrt(max(2.0 * sdnn**2 - 0.5 * sdsd**2, 0.0)))
    sd1_sd2 = sd1 / sd2 if sd2 > 0 else np.nan
    csi = sd2 / sd1 if sd1 > 0 else np.nan
    csi_mod = sd2**2 / sd1 if sd1 > 0 else np.nan
    cvi = np.log10(16.0 * sd1 * sd2) if sd1 * sd2 > 0 else np.nan
    return np.array([csi, csi_mod, sd1, sd2, sd1_sd2, cvi])


def geometric_domain(nni):
    """Triangular index: N over the modal histogram bin count (7.8125 ms bins)."""
    x = np.asarray(nni, dtype=np.float64)
    if x.size < 2:
        raise InputError("geometric features need >= 2 NNIs")
    bins = np.floor(x / TRI_BIN_WIDTH_MS).astype(np.int64)
    mode_count = np.max(np.bincount(bins - bins.min()))
    return np.array([x.size / mode_count])


def hrv_features(window: NniWindow):
    """The full 30-feature vector in HRV_FEATURE_NAMES order.

    NaN entries mark flagged-missing values (zero-denominator ratios); they
    are median-imputed per training fold downstream.
    """
    if not window.valid:
        raise InputError("HRV features are only defined on valid windows")
    td = time_domain(window.nni)
    t = np.concatenate([[0.0], np.cumsum(window.nni)])
    fd = frequency_domain(window.nni, beat_times=t)
    nl = nonlinear_domain(window.nni)
    geo = geometric_domain(window.nni)
    return np.concatenate([td, fd, nl, geo])


def write_feature_csv(path, window_features, names):
    """Per-window feature CSV: window_start_ms plus one named column per
    feature. ``window_features`` is an iterable of (start_ms, vector); the
    actigraphy module writes its windows through here too.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("window_start_ms," + ",".join(names) + "\n")
        for start_ms, vec in sorted(window_features, key=lambda row: row[0]):
            f.write(str(int(start_ms)) + "," + ",".join(repr(float(v)) for v in vec) + "\n")
