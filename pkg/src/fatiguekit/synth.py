"""Synthetic ECG, counts, and labelled cohorts with known ground truth.

Everything here is deterministic given its seed; per-segment generators get
independent child seeds via ``numpy.random.SeedSequence.spawn``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .errors import SpecError
from .ingest import (
    CountsRecord,
    EcgRecord,
    FatigueLabel,
    SegmentKey,
    segment_bounds_utc,
    write_counts_csv,
    write_ecg_csv,
    write_labels_csv,
)

# Stereotyped QRS-like beat: 120 ms support, 1 mV R spike with smaller
# flanking deflections. Enough structure for threshold-based detectors
# without modelling full PQRST morphology.
QRS_HALF_WIDTH_MS = 60.0


def _qrs_template(dt_ms):
    """Beat waveform (mV) at offsets dt_ms from the R point."""
    dt = np.asarray(dt_ms, dtype=np.float64)
    wave = (
        -0.15 * np.exp(-0.5 * ((dt + 30.0) / 8.0) ** 2)
        + 1.00 * np.exp(-0.5 * (dt / 5.0) ** 2)
        - 0.20 * np.exp(-0.5 * ((dt - 30.0) / 8.0) ** 2)
    )
    return np.where(np.abs(dt) <= QRS_HALF_WIDTH_MS, wave, 0.0)


@dataclass(frozen=True)
class SynthEcgSpec:
    duration_s: float
    sample_rate_hz: int
    mean_hr_bpm: float
    hrv_modulations: tuple = ()  # (frequency_hz, amplitude_ms) pairs
    noise_std_mv: float = 0.0
    seed: int = 0
    subject_id: str = "synth"
    start_time_ms: int = 0

    def __post_init__(self):
        if not 30 <= self.mean_hr_bpm <= 220:
            raise SpecError(f"mean HR {self.mean_hr_bpm} outside [30, 220] bpm")
        base = 60000.0 / self.mean_hr_bpm
        swing = sum(abs(a) for _, a in self.hrv_modulations)
        if not (300.0 < base - swing and base + swing < 2000.0):
            raise SpecError("modulations push intervals outside (300, 2000) ms")
        if self.duration_s <= 0 or self.sample_rate_hz < 100:
            raise SpecError("duration must be positive and sample rate >= 100 Hz")


def gen_ecg(spec: SynthEcgSpec):
    """Generate an ECG record plus the true beat times (absolute ms).

    Beat times integrate an instantaneous-rate model: each interval is the
    base interval 60000/mean_hr plus the sum of sinusoidal modulations
    evaluated at the current beat time.
    """
    rng = np.random.default_rng(spec.seed)
    base = 60000.0 / spec.mean_hr_bpm
    duration_ms = spec.duration_s * 1000.0

    beat_rel = []
    t = base  # first beat one base interval in, so the full QRS fits
    while t + QRS_HALF_WIDTH_MS < duration_ms:
        beat_rel.append(t)
        interval = base
        for f_hz, amp_ms in spec.hrv_modulations:
            interval += amp_ms * np.sin(2.0 * np.pi * f_hz * t / 1000.0)
        if not 300.0 < interval < 2000.0:
            raise SpecError(f"generated interval {interval:.1f} ms outside (300, 2000)")
        t += interval
    beat_rel = np.asarray(beat_rel)

    n = int(round(spec.duration_s * spec.sample_rate_hz))
    samples = np.zeros(n)
    sample_ms = 1000.0 / spec.sample_rate_hz
    half = int(np.ceil(QRS_HALF_WIDTH_MS / sample_ms))
    for bt in beat_rel:
        c = int(round(bt / sample_ms))
        lo, hi = max(0, c - half), min(n, c + half + 1)
        idx = np.arange(lo, hi)
        samples[idx] += _qrs_template(idx * sample_ms - bt)
    if spec.noise_std_mv > 0:
        samples += rng.normal(0.0, spec.noise_std_mv, n)
    # quantize to 0.1 uV so the CSV form stays compact and round-trips exactly
    samples = np.round(samples, 4)

    record = EcgRecord(spec.subject_id, spec.start_time_ms, spec.sample_rate_hz, samples)
    return record, beat_rel + spec.start_time_ms


def gen_counts(duration_s, activity_profile, nonwear_intervals=(), seed=0,
               subject_id="synth", start_time_ms=0):
    """Poisson counts per 30 s epoch from a piecewise-constant intensity.

    ``activity_profile`` is a list of (start_s, end_s, mean_counts_per_epoch)
    pieces; epochs outside every piece have intensity 0. Epochs overlapping a
    non-wear interval are forced to exactly zero.
    """
    prev_end = None
    for lo, hi in sorted(nonwear_intervals):
        if lo < 0 or hi > duration_s or lo >= hi:
            raise SpecError(f"non-wear interval ({lo}, {hi}) outside recording")
        if prev_end is not None and lo < prev_end:
            raise SpecError("overlapping non-wear intervals")
        prev_end = hi

    rng = np.random.default_rng(seed)
    n = int(duration_s // 30)
    starts_s = np.arange(n) * 30.0
    intensity = np.zeros(n)
    for lo, hi, mean_counts in activity_profile:
        intensity[(starts_s >= lo) & (starts_s < hi)] = mean_counts
    counts = rng.poisson(intensity).astype(np.int64)
    for lo, hi in nonwear_intervals:
        counts[(starts_s + 30.0 > lo) & (starts_s < hi)] = 0
    times = (start_time_ms + starts_s * 1000.0).astype(np.int64)
    return CountsRecord(subject_id, times, counts)


LABEL_RULES = ("linear_hr", "linear_activity", "mixed")
# chronological order of the four daily segments in local time
DAY_PERIODS = ("night", "morning", "afternoon", "evening")


@dataclass(frozen=True)
class SynthCohortSpec:
    n_subjects: int
    days: int
    label_rule: str = "linear_hr"
    hr_coef: float = 0.2
    act_coef: float = 0.0
    intercept: float = -9.0
    noise_std: float = 0.0
    seed: int = 0
    # tractability knobs: segments carry coverage_min minutes of signal
    sample_rate_hz: int = 100
    coverage_min: int = 105
    hr_range: tuple = (55.0, 95.0)
    activity_range: tuple = (50.0, 400.0)
    ecg_noise_std_mv: float = 0.02
    hrv_modulations: tuple = ((0.1, 20.0), (0.25, 15.0))
    start_date: date = date(2024, 3, 4)

    def __post_init__(self):
        if self.n_subjects < 2:
            raise SpecError("cohort needs at least 2 subjects")
        if self.days < 1:
            raise SpecError("cohort needs at least 1 day")
        if self.label_rule not in LABEL_RULES:
            raise SpecError(f"unknown label rule {self.label_rule!r}")
        if not 20 <= self.coverage_min <= 360:
            raise SpecError("coverage must be 20..360 minutes")


def _noiseless_score(spec, hr, act):
    if spec.label_rule == "linear_hr":
        return spec.hr_coef * hr + spec.intercept
    if spec.label_rule == "linear_activity":
        return spec.act_coef * act + spec.intercept
    return spec.hr_coef * hr + spec.act_coef * act + spec.intercept


def gen_cohort(spec: SynthCohortSpec, outdir):
    """Write a full synthetic cohort (ECG + counts + labels CSVs) to disk.

    Layout: ``ecg/<subject>_<date>_<period>.csv``, ``counts/...``,
    ``labels.csv``, and a ``ground_truth.csv`` sidecar with the latent
    per-segment parameters and the noiseless score.
    """
    outdir = str(outdir)
    ecg_dir = os.path.join(outdir, "ecg")
    counts_dir = os.path.join(outdir, "counts")
    os.makedirs(ecg_dir, exist_ok=True)
    os.makedirs(counts_dir, exist_ok=True)

    segments = [
        (f"s{si + 1:02d}", spec.start_date + timedelta(days=di), period)
        for si in range(spec.n_subjects)
        for di in range(spec.days)
        for period in DAY_PERIODS
    ]
    children = np.random.SeedSequence(spec.seed).spawn(len(segments) + 1)
    label_rng = np.random.default_rng(children[-1])

    labels = []
    truth_rows = []
    for (subject, day, period), child in zip(segments, children):
        rng = np.random.default_rng(child)
        hr = rng.uniform(*spec.hr_range)
        act = rng.uniform(*spec.activity_range)
        seg_start, _ = segment_bounds_utc(SegmentKey(subject, day, period))
        duration_s = spec.coverage_min * 60

        ecg_spec = SynthEcgSpec(
            duration_s=duration_s,
            sample_rate_hz=spec.sample_rate_hz,
            mean_hr_bpm=hr,
            hrv_modulations=spec.hrv_modulations,
            noise_std_mv=spec.ecg_noise_std_mv,
            seed=int(rng.integers(2**63)),
            subject_id=subject,
            start_time_ms=seg_start,
        )
        record, _ = gen_ecg(ecg_spec)
        counts = gen_counts(
            duration_s,
            [(0.0, float(duration_s), act)],
            seed=int(rng.integers(2**63)),
            subject_id=subject,
            start_time_ms=seg_start,
        )

        stem = f"{subject}_{day.isoformat()}_{period}.csv"
        write_ecg_csv(os.path.join(ecg_dir, stem), record)
        write_counts_csv(os.path.join(counts_dir, stem), counts)

        noiseless = _noiseless_score(spec, hr, act)
        noisy = noiseless + (label_rng.normal(0.0, spec.noise_std) if spec.noise_std > 0 else 0.0)
        score = int(np.clip(np.round(noisy), 0, 10))
        labels.append(FatigueLabel(subject, day, period, score))
        truth_rows.append((subject, day.isoformat(), period, hr, act, noiseless))

    write_labels_csv(os.path.join(outdir, "labels.csv"), labels)
    with open(os.path.join(outdir, "ground_truth.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("subject_id,date,period,mean_hr_bpm,activity_level,score_noiseless\n")
        for row in truth_rows:
            f.write("%s,%s,%s,%r,%r,%r\n" % row)
    return labels


def gen_sequence_dataset(n_samples, n_features, t_range=(20, 40), rule="dim0_mean",
                         coef=4.0, intercept=0.0, noise_std=0.0, seed=0, n_subjects=5):
    """Directly synthesize a sequence dataset with a planted label signal.

    Rules: ``dim0_mean`` plants y = coef * mean(X[:, 0]) + intercept;
    ``early_mean`` uses only the first five windows of dim 0, which gives
    attention something to localize. Latent u ~ U(0, 2.5) shifts dim 0.
    """
    from .fusion import Dataset, SequenceSample  # local import, no cycle

    rng = np.random.default_rng(seed)
    samples = []
    base_date = date(2024, 3, 4)
    for i in range(n_samples):
        t_len = int(rng.integers(t_range[0], t_range[1] + 1))
        x = rng.normal(0.0, 1.0, (t_len, n_features))
        u = rng.uniform(0.0, 2.5)
        if rule == "dim0_mean":
            x[:, 0] += u
            signal = coef * u + intercept
        elif rule == "early_mean":
            x[:5, 0] += u
            signal = coef * u + intercept
        else:
            raise SpecError(f"unknown rule {rule!r}")
        y = int(np.clip(np.round(signal + rng.normal(0.0, noise_std)), 0, 10))
        subject = f"s{(i % n_subjects) + 1:02d}"
        key = SegmentKey(subject, base_date + timedelta(days=i // 4), DAY_PERIODS[i % 4])
        seg_start, _ = segment_bounds_utc(key)
        timestamps = seg_start + np.arange(t_len) * 300_000
        samples.append(SequenceSample(key=key, X=x, timestamps=timestamps, y=y, modality="synthetic"))
    names = [f"f{j}" for j in range(n_features)]
    return Dataset(samples=samples, feature_names=names)
