"""Per-segment multimodal feature sequences with joint-validity rules.

A segment survives when it has a label and at least 20 jointly-valid 5-min
windows (100 minutes of usable data). Missing feature values stay NaN here;
imputation is fitted per training fold downstream to avoid leakage.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .acti import ACTI_FEATURE_NAMES
from .errors import AlignmentError, InputError
from .hrv import HRV_FEATURE_NAMES
from .ingest import PERIODS, SegmentKey, segment_bounds_utc

WINDOW_MS = 300_000
MIN_WINDOWS = 20  # the 100-minute usable-data rule
MAX_WINDOWS = 72  # a full 6-hour segment

MODALITY_DIMS = {"acti": 8, "ecg": 30, "both": 38}


def modality_feature_names(modality):
    if modality == "acti":
        return list(ACTI_FEATURE_NAMES)
    if modality == "ecg":
        return list(HRV_FEATURE_NAMES)
    if modality == "both":
        return list(HRV_FEATURE_NAMES) + list(ACTI_FEATURE_NAMES)
    raise InputError(f"unknown modality {modality!r}")


@dataclass(frozen=True)
class SequenceSample:
    key: SegmentKey
    X: np.ndarray  # T x D, row t = features of the t-th kept window
    timestamps: np.ndarray  # window start times, ms
    y: int
    modality: str

    def __post_init__(self):
        t, d = self.X.shape
        if not MIN_WINDOWS <= t <= MAX_WINDOWS:
            raise InputError(f"sequence length {t} outside [{MIN_WINDOWS}, {MAX_WINDOWS}]")
        if self.modality in MODALITY_DIMS and d != MODALITY_DIMS[self.modality]:
            raise InputError(f"modality {self.modality} expects D={MODALITY_DIMS[self.modality]}, got {d}")
        if len(self.timestamps) != t:
            raise InputError("one timestamp per window required")
        if not 0 <= self.y <= 10:
            raise InputError(f"label {self.y} outside 0-10")


@dataclass
class Dataset:
    samples: list
    feature_names: list
    subjects: list = None  # defaults to the subjects present in samples
    drop_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subjects is None:
            self.subjects = sorted({s.key.subject_id for s in self.samples})

    def __len__(self):
        return len(self.samples)


def build_sequences(ecg_windows, acti_windows, labels, modality, tz_offsets=None):
    """Assemble SequenceSamples from per-segment window feature maps.

    ``ecg_windows`` / ``acti_windows``: {SegmentKey: {window_start_ms: vector}}
    holding only *valid* windows. For modality='both' a window is kept iff
    both modalities are valid at that timestamp; single-modality runs ignore
    the other stream entirely.
    """
    if modality not in MODALITY_DIMS:
        raise InputError(f"unknown modality {modality!r}")
    tz_offsets = tz_offsets or {}
    label_map = {(lb.subject_id, lb.date, lb.period): lb.score for lb in labels}

    keys = set()
    if modality in ("ecg", "both"):
        keys |= set(ecg_windows)
    if modality in ("acti", "both"):
        keys |= set(acti_windows)

    drops = {"no_label": 0, "too_few_windows": 0}
    samples = []
    for key in sorted(keys, key=lambda k: (k.subject_id, k.date.isoformat(), PERIODS.index(k.period))):
        offset = tz_offsets.get(key.subject_id, 0)
        seg_start, seg_end = segment_bounds_utc(key, offset)

        per_slot = {}
        sources = []
        if modality in ("ecg", "both"):
            sources.append(ecg_windows.get(key, {}))
        if modality in ("acti", "both"):
            sources.append(acti_windows.get(key, {}))
        slot_sets = []
        for src in sources:
            for t in src:
                if (t - seg_start) % WINDOW_MS != 0 or not seg_start <= t < seg_end:
                    raise AlignmentError(
                        f"window start {t} off the 5-min grid of segment {key}"
                    )
            slot_sets.append(set(src))
        kept = sorted(set.intersection(*slot_sets)) if slot_sets else []

        if (key.subject_id, key.date, key.period) not in label_map:
            drops["no_label"] += 1
            continue
        if len(kept) < MIN_WINDOWS:
            drops["too_few_windows"] += 1
            continue

        rows = []
        for t in kept:
            parts = [src[t] for src in sources]
            rows.append(np.concatenate(parts))
        samples.append(SequenceSample(
            key=key,
            X=np.asarray(rows, dtype=np.float64),
            timestamps=np.asarray(kept, dtype=np.int64),
            y=label_map[(key.subject_id, key.date, key.period)],
            modality=modality,
        ))
    return Dataset(samples=samples, feature_names=modality_feature_names(modality), drop_counts=drops)


def save_dataset(dataset: Dataset, outdir):
    """One directory per sample: X.csv (header = feature names) + meta.csv."""
    outdir = str(outdir)
    os.makedirs(outdir, exist_ok=True)
    for i, s in enumerate(sorted(dataset.samples, key=lambda s: (s.key.subject_id, s.key.date.isoformat(), PERIODS.index(s.key.period)))):
        d = os.path.join(outdir, f"sample_{i:04d}")
        os.makedirs(d, exist_ok=True)
        with open(os.path.join(d, "X.csv"), "w", encoding="utf-8", newline="\n") as f:
            f.write(",".join(dataset.feature_names) + "\n")
            for row in s.X:
                f.write(",".join(repr(v) for v in row.tolist()) + "\n")
        with open(os.path.join(d, "meta.csv"), "w", encoding="utf-8", newline="\n") as f:
            f.write("subject_id,date,period,y,modality,timestamps\n")
            ts = ";".join(str(t) for t in s.timestamps.tolist())
            f.write(f"{s.key.subject_id},{s.key.date.isoformat()},{s.key.period},{s.y},{s.modality},{ts}\n")


def load_dataset(path) -> Dataset:
    from datetime import date as _date

    path = str(path)
    sample_dirs = sorted(
        d for d in os.listdir(path)
        if d.startswith("sample_") and os.path.isdir(os.path.join(path, d))
    )
    if not sample_dirs:
        raise InputError(f"no sample_* directories under {path}")
    samples = []
    feature_names = None
    for d in sample_dirs:
        xp = os.path.join(path, d, "X.csv")
        df = pd.read_csv(xp, float_precision="round_trip")
        names = list(df.columns)
        if feature_names is None:
            feature_names = names
        elif names != feature_names:
            raise InputError(f"{xp}: feature names differ across samples")
        meta = pd.read_csv(os.path.join(path, d, "meta.csv"))
        row = meta.iloc[0]
        key = SegmentKey(str(row["subject_id"]), _date.fromisoformat(str(row["date"])), str(row["period"]))
        ts = np.array([int(t) for t in str(row["timestamps"]).split(";")], dtype=np.int64)
        samples.append(SequenceSample(
            key=key, X=df.to_numpy(dtype=np.float64), timestamps=ts,
            y=int(row["y"]), modality=str(row["modality"]),
        ))
    return Dataset(samples=samples, feature_names=feature_names)
