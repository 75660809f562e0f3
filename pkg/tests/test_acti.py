import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fatiguekit import acti, synth
from fatiguekit.errors import InputError
from fatiguekit.ingest import EPOCH_MS, CountsRecord

from oracles import brute_moments


def record(counts):
    counts = np.asarray(counts, dtype=np.int64)
    times = np.arange(counts.size, dtype=np.int64) * EPOCH_MS
    return CountsRecord("s1", times, counts)


class TestDetectNonwear:
    def test_ninety_minutes_of_zeros(self):
        rec = record([0] * 180)
        assert not acti.detect_nonwear(rec).any()  # all epochs non-wear

    def test_thirty_minute_gap_stays_wear(self):
        rec = record([200] * 20 + [0] * 60 + [200] * 20)
        assert acti.detect_nonwear(rec).all()

    def test_short_spike_inside_long_run_absorbed(self):
        # 70 min of zeros with one 1-minute spike at 40 counts/min
        counts = [0] * 70 + [20, 20] + [0] * 70
        wear = acti.detect_nonwear(record([300] * 10 + counts + [300] * 10))
        assert wear[:10].all() and wear[-10:].all()
        assert not wear[10:-10].any()

    def test_big_interruption_splits_run(self):
        # a 200 counts/epoch burst is real activity: each zero run is only
        # 50 min, so everything stays wear
        counts = [0] * 100 + [200, 200] + [0] * 100
        assert acti.detect_nonwear(record(counts)).all()

    def test_edge_spikes_not_interior(self):
        # spikes at the run boundary cannot be absorbed
        counts = [20, 20] + [0] * 120 + [20, 20]
        wear = acti.detect_nonwear(record(counts))
        assert wear[:2].all() and wear[-2:].all()
        assert not wear[2:-2].any()

    def test_fiftynine_minutes_stays_wear(self):
        assert acti.detect_nonwear(record([0] * 118)).all()

    def test_too_many_spikes_fall_back_to_zero_runs(self):
        chunk = [0] * 130
        counts = chunk + [20] + [0] * 30 + [20] + [0] * 30 + [20] + [0] * 30 + [20] + [0] * 30 + [20] + chunk
        wear = acti.detect_nonwear(record(counts))
        assert not wear[:130].any()
        assert not wear[-130:].any()
        assert wear[131:-131].any()  # the short zero runs between spikes stay wear


class TestWindowStats:
    def test_constant_counts(self):
        np.testing.assert_array_equal(
            acti.window_stats([100] * 10),
            [100.0, 100.0, 0.0, 0.0, 100.0, 100.0, 0.0, 0.0],
        )

    def test_single_spike_window(self):
        counts = [0] * 9 + [1000]
        stats = acti.window_stats(counts)
        assert stats[0] == pytest.approx(100.0)  # mean
        assert stats[4] == 0.0 and stats[5] == 1000.0
        skew, kurt = brute_moments(counts)
        assert stats[6] == pytest.approx(skew, rel=1e-12)
        assert stats[7] == pytest.approx(kurt, rel=1e-12)

    def test_wrong_length_rejected(self):
        with pytest.raises(InputError):
            acti.window_stats([1] * 9)

    @given(st.lists(st.integers(min_value=0, max_value=5000), min_size=10, max_size=10))
    @settings(max_examples=100, deadline=None)
    def test_invariants(self, counts):
        stats = acti.window_stats(counts)
        mean, median, std, var, mn, mx = stats[:6]
        assert var == std * std
        assert mn <= median <= mx
        assert stats.shape == (8,)


class TestWindowCounts:
    def test_nonwear_epoch_invalidates_window(self):
        rec = synth.gen_counts(3600, [(0, 3600, 100.0)], seed=0)
        wear = np.ones(rec.counts.size, dtype=bool)
        wear[5] = False  # one epoch in the first window
        windows = acti.window_counts(rec, wear, 0, 3600 * 1000)
        assert len(windows) == 12
        assert not windows[0].wear and windows[0].features is None
        assert windows[1].wear and windows[1].features is not None

    def test_feature_count_is_8(self):
        rec = synth.gen_counts(1800, [(0, 1800, 50.0)], seed=1)
        wear = np.ones(rec.counts.size, dtype=bool)
        windows = acti.window_counts(rec, wear, 0, 1800 * 1000)
        assert all(w.features.shape == (8,) for w in windows)
        assert len(acti.ACTI_FEATURE_NAMES) == 8

    def test_partial_window_skipped(self):
        rec = synth.gen_counts(3600, [(0, 3600, 50.0)], seed=2)
        # segment grid shifted so the record covers only part of slot 0
        windows = acti.window_counts(rec, np.ones(rec.counts.size, dtype=bool),
                                     -EPOCH_MS * 3, 3600 * 1000)
        starts = [w.window_start_ms for w in windows]
        assert -EPOCH_MS * 3 not in starts

    def test_feature_csv_mirrors_hrv_format(self, tmp_path):
        from fatiguekit.hrv import write_feature_csv

        rec = synth.gen_counts(1800, [(0, 1800, 50.0)], seed=3)
        windows = acti.window_counts(rec, np.ones(rec.counts.size, dtype=bool), 0, 1800 * 1000)
        path = tmp_path / "acti.csv"
        write_feature_csv(path, [(w.window_start_ms, w.features) for w in windows],
                          acti.ACTI_FEATURE_NAMES)
        header = path.read_text().split("\n")[0]
        assert header == "window_start_ms," + ",".join(acti.ACTI_FEATURE_NAMES)
