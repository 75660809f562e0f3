import pathlib
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fatiguekit import ecg, hrv
from fatiguekit.errors import InputError

from oracles import brute_time_domain

nni_series = st.lists(st.floats(min_value=300.0, max_value=2000.0), min_size=3, max_size=200)


def make_window(nni, valid=True):
    nni = np.asarray(nni, dtype=np.float64)
    mask = np.zeros(nni.size, dtype=bool)
    report, _ = ecg.assess_quality(nni, mask)
    return ecg.NniWindow(0, 300_000, nni, mask, report, valid)


def single_tone_nni(freq_hz, amp_ms=30.0, base_ms=800.0, duration_ms=300_000.0):
    t, out = 0.0, []
    while t < duration_ms:
        v = base_ms + amp_ms * np.sin(2 * np.pi * freq_hz * t / 1000.0)
        out.append(v)
        t += v
    return np.array(out)


class TestTimeDomain:
    def test_constant_series(self):
        td = hrv.time_domain([800.0] * 375)
        by = dict(zip(hrv.HRV_FEATURE_NAMES[:16], td))
        assert by["mean_hr"] == pytest.approx(75.0)
        for name in ["sdnn", "rmssd", "nn50", "range_nn", "cvsd", "std_hr", "sdsd"]:
            assert by[name] == 0.0

    def test_alternating_pattern(self):
        td = hrv.time_domain([800.0, 850.0] * 50)
        by = dict(zip(hrv.HRV_FEATURE_NAMES[:16], td))
        assert by["rmssd"] == pytest.approx(50.0)
        # 99 diffs: 50 of +50 and 49 of -50, so the mean diff is 50/99, not 0
        assert by["sdsd"] == pytest.approx(np.sqrt(2500.0 - (50.0 / 99.0) ** 2), rel=1e-12)
        assert by["sdsd"] == pytest.approx(50.0, rel=1e-2)
        assert by["nn20"] == 99
        assert by["nn50"] == 0  # strict > 50

    def test_two_values(self):
        td = hrv.time_domain([600.0, 900.0])
        by = dict(zip(hrv.HRV_FEATURE_NAMES[:16], td))
        assert by["nn_mean"] == 750.0
        assert by["range_nn"] == 300.0
        assert by["nn50"] == 1
        assert by["pnn50"] == 1.0

    def test_single_nni_rejected(self):
        with pytest.raises(InputError):
            hrv.time_domain([800.0])

    def test_matches_brute_force_on_1000_random_series(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            series = rng.uniform(300.0, 2000.0, n)
            np.testing.assert_allclose(hrv.time_domain(series), brute_time_domain(series),
                                       rtol=1e-12, atol=1e-12)

    @given(nni_series)
    @settings(max_examples=100, deadline=None)
    def test_pnn50_le_pnn20(self, series):
        td = hrv.time_domain(series)
        assert td[9] <= td[10]  # pnn50 <= pnn20

    @given(nni_series)
    @settings(max_examples=100, deadline=None)
    def test_rmssd_nonneg_zero_iff_constant_diffs(self, series):
        td = hrv.time_domain(series)
        d = np.diff(series)
        assert td[11] >= 0.0
        assert (td[11] == 0.0) == bool(np.all(d == 0.0))


class TestFrequencyDomain:
    def test_constant_series_zero_power(self):
        fd = hrv.frequency_domain([800.0] * 375)
        assert abs(fd[0]) < 1e-10 and abs(fd[1]) < 1e-10
        assert abs(fd[2]) < 1e-10 and abs(fd[3]) < 1e-10
        assert np.isnan(fd[4])  # lf_hf missing when hf = 0

    def test_hf_tone_dominates_hf_band(self):
        fd = hrv.frequency_domain(single_tone_nni(0.25))
        total, lf, hf = fd[0], fd[1], fd[2]
        assert hf / (lf + hf) > 0.95

    def test_lf_tone_dominates_lf_band(self):
        fd = hrv.frequency_domain(single_tone_nni(0.10))
        total, lf, hf = fd[0], fd[1], fd[2]
        assert lf / (lf + hf) > 0.95

    def test_too_short_span_rejected(self):
        with pytest.raises(InputError):
            hrv.frequency_domain([800.0] * 10)

    @given(st.lists(st.floats(min_value=500.0, max_value=2000.0), min_size=130, max_size=300))
    @settings(max_examples=50, deadline=None)
    def test_band_powers_nonnegative_and_norms_complete(self, series):
        fd = hrv.frequency_domain(series)
        total, lf, hf, vlf = fd[0], fd[1], fd[2], fd[3]
        assert lf >= 0 and hf >= 0 and vlf >= 0 and total >= 0
        if total > 0:
            lf_norm, hf_norm = fd[5], fd[6]
            assert lf_norm + hf_norm <= 1.0 + 1e-9
            assert lf_norm + hf_norm + vlf / total == pytest.approx(1.0, abs=1e-9)


class TestNonlinearDomain:
    def test_alternating_sd1(self):
        series = np.array([800.0, 850.0] * 50)
        nl = hrv.nonlinear_domain(series)
        sdsd = float(np.std(np.diff(series)))
        assert nl[2] == pytest.approx(sdsd / np.sqrt(2), rel=1e-12)
        assert nl[2] == pytest.approx(35.355, rel=1e-3)

    def test_constant_flags_missing(self):
        nl = hrv.nonlinear_domain([800.0] * 10)
        assert nl[2] == 0.0 and nl[3] == 0.0
        assert np.isnan(nl[0]) and np.isnan(nl[1])

    @given(nni_series)
    @settings(max_examples=100, deadline=None)
    def test_sd_identity(self, series):
        # the identity holds exactly whenever sd2's radicand is nonnegative;
        # strongly anti-correlated series clamp sd2 at 0 instead
        nl = hrv.nonlinear_domain(series)
        sd1, sd2 = nl[2], nl[3]
        sdnn = float(np.std(series))
        sdsd = float(np.std(np.diff(series)))
        if sdnn <= 1e-6:
            return
        if 2 * sdnn**2 >= 0.5 * sdsd**2:
            assert sd1**2 + sd2**2 == pytest.approx(2 * sdnn**2, rel=1e-9)
        else:
            assert sd2 == 0.0


class TestGeometricDomain:
    def test_constant_single_bin(self):
        assert hrv.geometric_domain([800.0] * 375)[0] == 1.0

    def test_uniform_one_per_bin(self):
        series = 300.0 + np.arange(100) * hrv.TRI_BIN_WIDTH_MS
        assert hrv.geometric_domain(series)[0] == 100.0

    def test_hand_histogram(self):
        assert hrv.geometric_domain([800.0] * 3 + [850.0])[0] == pytest.approx(4 / 3)


class TestHrvFeatures:
    def test_length_is_30(self):
        w = make_window(np.full(375, 800.0) + np.tile([0.0, 10.0], 188)[:375])
        assert hrv.hrv_features(w).shape == (30,)

    def test_constant_window_zeros_at_dispersion_features(self):
        vec = hrv.hrv_features(make_window([800.0] * 375))
        by = dict(zip(hrv.HRV_FEATURE_NAMES, vec))
        for name in ["std_hr", "sdsd", "sdnn", "rmssd", "range_nn", "sd1", "sd2"]:
            assert by[name] == 0.0

    def test_invalid_window_rejected(self):
        with pytest.raises(InputError):
            hrv.hrv_features(make_window([800.0] * 375, valid=False))

    def test_order_matches_feature_dictionary(self):
        doc = pathlib.Path(__file__).parent.parent / "docs" / "hrv_features.md"
        rows = re.findall(r"^\| (\d+) \| (\w+) \|", doc.read_text(), re.MULTILINE)
        assert [name for _, name in sorted(rows, key=lambda r: int(r[0]))] == hrv.HRV_FEATURE_NAMES


class TestFeatureCsv:
    def test_rows_sorted_and_named(self, tmp_path):
        rows = [(600_000, np.arange(30.0)), (300_000, np.arange(30.0) + 1)]
        path = tmp_path / "feats.csv"
        hrv.write_feature_csv(path, rows, hrv.HRV_FEATURE_NAMES)
        lines = path.read_text().strip().split("\n")
        assert lines[0].split(",")[:2] == ["window_start_ms", "min_hr"]
        assert lines[1].startswith("300000,")
        assert lines[2].startswith("600000,")
