"""Raw data ingestion: sensor CSV readers/writers, labels, and daily period slicing.

File formats (UTF-8, comma-separated, ``\\n`` line endings, header row mandatory):

* ECG: header ``subject_id,start_time_ms,sample_rate_hz``, one metadata row,
  then one voltage (mV) per row.
* Counts: header ``subject_id,epoch_start_ms,counts``, one row per 30 s epoch.
* Labels: header ``subject_id,date,period,score``, one row per questionnaire entry.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import NamedTuple

import numpy as np
import pandas as pd

from .errors import DataError, ParseError

EPOCH_MS = 30_000  # fixed actigraphy epoch length

PERIODS = ("morning", "afternoon", "evening", "night")
PERIOD_START_HOUR = {"night": 0, "morning": 6, "afternoon": 12, "evening": 18}
PERIOD_LEN_MS = 6 * 3600 * 1000

ECG_HEADER = "subject_id,start_time_ms,sample_rate_hz"
COUNTS_HEADER = "subject_id,epoch_start_ms,counts"
LABELS_HEADER = "subject_id,date,period,score"


@dataclass(frozen=True)
class EcgRecord:
    """A single-lead ECG stream with a fixed sample rate."""

    subject_id: str
    start_time_ms: int
    sample_rate_hz: int
    samples: np.ndarray  # mV, float64

    def __post_init__(self):
        if self.sample_rate_hz < 100:
            raise DataError(f"sample rate {self.sample_rate_hz} Hz below the 100 Hz minimum")
        if len(self.samples) == 0:
            raise DataError("ECG record has no samples")
        if not np.all(np.isfinite(self.samples)):
            row = int(np.flatnonzero(~np.isfinite(self.samples))[0]) + 1
            raise DataError(f"non-finite ECG sample at row {row}", row=row)

    @property
    def duration_s(self):
        return len(self.samples) / self.sample_rate_hz

    @property
    def end_time_ms(self):
        return self.start_time_ms + int(round(self.duration_s * 1000))


@dataclass(frozen=True)
class CountsRecord:
    """Actigraphy counts, one integer per 30 s epoch, gap-free."""

    subject_id: str
    epoch_start_times: np.ndarray  # ms, int64
    counts: np.ndarray  # int64, >= 0

    def __post_init__(self):
        if len(self.epoch_start_times) == 0:
            raise DataError("counts record has no epochs")
        if len(self.epoch_start_times) != len(self.counts):
            raise DataError("epoch times and counts differ in length")
        spacing = np.diff(self.epoch_start_times)
        if spacing.size and not np.all(spacing == EPOCH_MS):
            row = int(np.flatnonzero(spacing != EPOCH_MS)[0]) + 2
            raise DataError(f"epoch spacing != {EPOCH_MS} ms at row {row}", row=row)
        if np.any(self.counts < 0):
            row = int(np.flatnonzero(self.counts < 0)[0]) + 1
            raise DataError(f"negative count at row {row}", row=row)


@dataclass(frozen=True)
class FatigueLabel:
    """One self-reported 0-10 fatigue score for a (subject, date, period)."""

    subject_id: str
    date: date
    period: str
    score: int

    def __post_init__(self):
        if self.period not in PERIODS:
            raise DataError(f"unknown period {self.period!r}")
        if not 0 <= self.score <= 10:
            raise DataError(f"score {self.score} outside 0-10")


class SegmentKey(NamedTuple):
    subject_id: str
    date: date
    period: str


def read_ecg_csv(path) -> EcgRecord:
    """Read an ECG CSV (metadata row then one voltage per row)."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != ECG_HEADER:
            raise ParseError(f"{path}: expected header {ECG_HEADER!r}, got {header!r}")
        meta = f.readline().rstrip("\n").split(",")
        if len(meta) != 3:
            raise ParseError(f"{path}: metadata row must have 3 fields")
        subject_id = meta[0]
        try:
            start_time_ms = int(meta[1])
            sample_rate_hz = int(meta[2])
        except ValueError as e:
            raise ParseError(f"{path}: bad metadata row: {e}") from None
        body = f.read()
    if not body.strip():
        raise DataError(f"{path}: empty sample section")
    try:
        samples = pd.read_csv(io.StringIO(body), header=None, dtype=np.float64,
                              float_precision="round_trip").iloc[:, 0].to_numpy()
    except ValueError:
        raise DataError(f"{path}: non-numeric voltage sample") from None
    return EcgRecord(subject_id, start_time_ms, sample_rate_hz, samples)


def write_ecg_csv(path, record: EcgRecord):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(ECG_HEADER + "\n")
        f.write(f"{record.subject_id},{record.start_time_ms},{record.sample_rate_hz}\n")
        # repr round-trips float64 exactly, keeping write->read an identity
        f.write("\n".join(map(repr, record.samples.tolist())))
        f.write("\n")


def read_counts_csv(path) -> CountsRecord:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != COUNTS_HEADER:
            raise ParseError(f"{path}: expected header {COUNTS_HEADER!r}, got {header!r}")
        df = pd.read_csv(f, header=None, names=["subject_id", "epoch_start_ms", "counts"])
    if df.empty:
        raise DataError(f"{path}: no epochs")
    subjects = df["subject_id"].unique()
    if len(subjects) != 1:
        raise DataError(f"{path}: more than one subject_id in file")
    try:
        times = df["epoch_start_ms"].to_numpy(dtype=np.int64)
        counts = df["counts"].to_numpy(dtype=np.int64)
    except (ValueError, TypeError):
        raise DataError(f"{path}: non-integer epoch time or count") from None
    return CountsRecord(str(subjects[0]), times, counts)


def write_counts_csv(path, record: CountsRecord):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(COUNTS_HEADER + "\n")
        for t, c in zip(record.epoch_start_times.tolist(), record.counts.tolist()):
            f.write(f"{record.subject_id},{t},{c}\n")


def read_labels_csv(path) -> list[FatigueLabel]:
    """Read fatigue labels; at most one per (subject, date, period)."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != LABELS_HEADER:
            raise ParseError(f"{path}: expected header {LABELS_HEADER!r}, got {header!r}")
        df = pd.read_csv(f, header=None, names=["subject_id", "date", "period", "score"])
    labels = []
    seen = set()
    for i, row in enumerate(df.itertuples(index=False), start=1):
        try:
            d = date.fromisoformat(str(row.date))
        except ValueError:
            raise DataError(f"{path}: bad date {row.date!r} at row {i}", row=i) from None
        score = row.score
        if not float(score).is_integer():
            raise DataError(f"{path}: non-integer score at row {i}", row=i)
        label = FatigueLabel(str(row.subject_id), d, str(row.period), int(score))
        key = (label.subject_id, label.date, label.period)
        if key in seen:
            raise DataError(f"{path}: duplicate label for {key} at row {i}", row=i)
        seen.add(key)
        labels.append(label)
    return labels


def write_labels_csv(path, labels):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(LABELS_HEADER + "\n")
        for lb in labels:
            f.write(f"{lb.subject_id},{lb.date.isoformat()},{lb.period},{lb.score}\n")


def assign_period(timestamp_ms, timezone_offset_min=0):
    """Map a UTC timestamp to its local (date, period).

    Boundaries: morning [06,12), afternoon [12,18), evening [18,24),
    night [00,06). A night timestamp belongs to its own local calendar date.
    """
    local = datetime.fromtimestamp(timestamp_ms / 1000.0, tz=timezone.utc) + timedelta(
        minutes=timezone_offset_min
    )
    h = local.hour
    if 6 <= h < 12:
        period = "morning"
    elif 12 <= h < 18:
        period = "afternoon"
    elif 18 <= h < 24:
        period = "evening"
    else:
        period = "night"
    return local.date(), period


def segment_bounds_utc(key: SegmentKey, timezone_offset_min=0):
    """UTC (start_ms, end_ms) of the 6-hour segment behind a SegmentKey."""
    start_local = datetime(
        key.date.year, key.date.month, key.date.day,
        PERIOD_START_HOUR[key.period], tzinfo=timezone.utc,
    ) - timedelta(minutes=timezone_offset_min)
    start_ms = int(start_local.timestamp() * 1000)
    return start_ms, start_ms + PERIOD_LEN_MS


def segments_overlapping(record_start_ms, record_end_ms, timezone_offset_min=0):
    """All (date, period) segments a [start, end) time span touches, in order."""
    out = []
    t = record_start_ms
    while t < record_end_ms:
        d, p = assign_period(t, timezone_offset_min)
        out.append((d, p))
        seg_start, seg_end = segment_bounds_utc(SegmentKey("", d, p), timezone_offset_min)
        t = seg_end
    return out
