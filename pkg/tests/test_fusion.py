from datetime import date

import numpy as np
import pytest

from fatiguekit import fusion
from fatiguekit.errors import AlignmentError, InputError
from fatiguekit.ingest import FatigueLabel, SegmentKey, segment_bounds_utc

KEY = SegmentKey("s1", date(2024, 3, 4), "morning")
SEG_START, SEG_END = segment_bounds_utc(KEY)


def window_map(key, n, dim, start_slot=0, rng=None):
    lo, _ = segment_bounds_utc(key)
    out = {}
    for k in range(start_slot, start_slot + n):
        vec = np.full(dim, float(k)) if rng is None else rng.normal(size=dim)
        out[lo + k * fusion.WINDOW_MS] = vec
    return {key: out}


def label(key, score=5):
    return FatigueLabel(key.subject_id, key.date, key.period, score)


class TestBuildSequences:
    def test_full_segment_has_t72(self):
        ds = fusion.build_sequences(window_map(KEY, 72, 30), window_map(KEY, 72, 8),
                                    [label(KEY)], "both")
        assert len(ds.samples) == 1
        assert ds.samples[0].X.shape == (72, 38)

    def test_nineteen_windows_dropped(self):
        ds = fusion.build_sequences(window_map(KEY, 19, 30), window_map(KEY, 19, 8),
                                    [label(KEY)], "both")
        assert len(ds.samples) == 0
        assert ds.drop_counts["too_few_windows"] == 1

    def test_twenty_windows_kept(self):
        ds = fusion.build_sequences(window_map(KEY, 20, 30), window_map(KEY, 20, 8),
                                    [label(KEY)], "both")
        assert len(ds.samples) == 1
        assert ds.samples[0].X.shape[0] == 20

    def test_ecg_modality_ignores_acti_validity(self):
        ds = fusion.build_sequences(window_map(KEY, 30, 30), {}, [label(KEY)], "ecg")
        assert len(ds.samples) == 1
        assert ds.samples[0].X.shape == (30, 30)
        assert len(ds.feature_names) == 30

    def test_both_requires_joint_validity(self):
        ecg_w = window_map(KEY, 40, 30)  # slots 0..39
        acti_w = window_map(KEY, 25, 8, start_slot=25)  # slots 25..49, overlap 15
        ds = fusion.build_sequences(ecg_w, acti_w, [label(KEY)], "both")
        assert len(ds.samples) == 0  # 15 joint windows < 20
        acti_w = window_map(KEY, 30, 8, start_slot=10)  # slots 10..39, overlap 30
        ds = fusion.build_sequences(ecg_w, acti_w, [label(KEY)], "both")
        assert ds.samples[0].X.shape[0] == 30
        assert ds.samples[0].timestamps[0] == SEG_START + 10 * fusion.WINDOW_MS

    def test_missing_label_drops_segment(self):
        ds = fusion.build_sequences(window_map(KEY, 30, 30), {}, [], "ecg")
        assert len(ds.samples) == 0
        assert ds.drop_counts["no_label"] == 1

    def test_misaligned_grid_rejected(self):
        lo, _ = segment_bounds_utc(KEY)
        bad = {KEY: {lo + 1234: np.zeros(30)}}
        with pytest.raises(AlignmentError):
            fusion.build_sequences(bad, {}, [label(KEY)], "ecg")

    def test_window_timestamps_inside_segment(self):
        ds = fusion.build_sequences(window_map(KEY, 72, 30), {}, [label(KEY)], "ecg")
        ts = ds.samples[0].timestamps
        assert ts.min() >= SEG_START and ts.max() + fusion.WINDOW_MS <= SEG_END

    def test_feature_widths_by_modality(self):
        for modality, d in fusion.MODALITY_DIMS.items():
            assert len(fusion.modality_feature_names(modality)) == d
        assert fusion.MODALITY_DIMS["both"] == 38

    def test_unknown_modality_rejected(self):
        with pytest.raises(InputError):
            fusion.build_sequences({}, {}, [], "emg")


class TestSequenceSample:
    def test_length_bounds_enforced(self):
        with pytest.raises(InputError):
            fusion.SequenceSample(KEY, np.zeros((10, 30)), np.zeros(10, dtype=np.int64),
                                  5, "ecg")
        with pytest.raises(InputError):
            fusion.SequenceSample(KEY, np.zeros((80, 30)), np.zeros(80, dtype=np.int64),
                                  5, "ecg")

    def test_dim_must_match_modality(self):
        with pytest.raises(InputError):
            fusion.SequenceSample(KEY, np.zeros((30, 8)), np.zeros(30, dtype=np.int64),
                                  5, "ecg")


class TestSerialization:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        keys = [SegmentKey("s1", date(2024, 3, 4), "morning"),
                SegmentKey("s2", date(2024, 3, 5), "night")]
        labels = [label(k, score=i + 2) for i, k in enumerate(keys)]
        ecg_w = {}
        for k in keys:
            ecg_w.update(window_map(k, 25, 30, rng=rng))
        ds = fusion.build_sequences(ecg_w, {}, labels, "ecg")
        # NaN markers must survive the round trip
        ds.samples[0].X[3, 7] = np.nan
        fusion.save_dataset(ds, tmp_path)
        back = fusion.load_dataset(tmp_path)
        assert back.feature_names == ds.feature_names
        assert len(back.samples) == 2
        for a, b in zip(sorted(ds.samples, key=lambda s: s.key), back.samples):
            assert a.key == b.key and a.y == b.y and a.modality == b.modality
            np.testing.assert_array_equal(a.timestamps, b.timestamps)
            np.testing.assert_array_equal(a.X, b.X)

    def test_load_missing_dir_rejected(self, tmp_path):
        with pytest.raises(InputError):
            fusion.load_dataset(tmp_path)
