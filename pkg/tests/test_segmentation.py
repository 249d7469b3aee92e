"""
Unit tests for gait cycle segmentation

Tests cover:
- Bias-corrected autocorrelation against a brute-force oracle
- Cycle length estimation (two-peak gait, pure sinusoid, aperiodic input)
- Negative peak search and the magnitude threshold
- Greedy selection of cycle starts and one-cycle splitting
- End-to-end segmentation of synthetic gait against its heel-strike truth
"""

import io
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from gaitauth import segmentation as seg
from gaitauth import synth
from gaitauth.earth_transform import GaitSignal
from gaitauth.errors import SignalError


def brute_autocorr(z):
    n = len(z)
    energy = sum(x * x for x in z)
    out = []
    for t in range(n):
        total = 0.0
        for i in range(n - t):
            total += z[i] * z[i + t]
        out.append(n / (n - t) * total / energy)
    return np.array(out)


def signal_of(z, rate_hz=27.0):
    z = np.asarray(z, dtype=float)
    return GaitSignal(rate_hz=rate_hz, z=z, xy=np.zeros_like(z), m=np.abs(z))


def synthetic_z(seed, noise_sigma=0.01, duration_s=30.0):
    """Raw vertical gait with a 30-sample cycle at 27 Hz."""
    params = synth.SubjectParams(
        cycle_s=30 / 27,
        harmonics_z=synth.strike_profile(1.5, (0.5, 0.42), (0.0, 0.0, 0.0)),
        harmonics_h=[(1.0, 0.0)],
        step_asymmetry=0.3,
        noise_sigma=noise_sigma,
        seed=seed,
    )
    earth, truth = synth.gen_earth_gait(params, duration_s, 27.0)
    return earth[:, 2], truth


def spiked(n, deep, shallow, deep_value=-5.0, shallow_value=-1.0):
    z = np.zeros(n)
    z[list(deep)] = deep_value
    z[list(shallow)] = shallow_value
    return z


class TestAutocorr(unittest.TestCase):
    """Test autocorr function"""

    def test_lag_zero_is_one(self):
        """Test that c_0 = 1 for any nonzero signal"""
        z = np.random.default_rng(1).normal(size=50)
        self.assertAlmostEqual(seg.autocorr(z)[0], 1.0, places=12)

    def test_matches_brute_force(self):
        """Test against the double-loop definition"""
        z = np.sin(2 * np.pi * np.arange(60) / 12) + 0.1 * np.random.default_rng(4).normal(size=60)
        np.testing.assert_allclose(seg.autocorr(z), brute_autocorr(list(z)), atol=1e-9)

    def test_sinusoid_max_at_period(self):
        """Test a local maximum at the sinusoid period"""
        c = seg.autocorr(np.sin(2 * np.pi * np.arange(200) / 20))
        self.assertGreater(c[20], c[19])
        self.assertGreater(c[20], c[21])

    def test_white_noise_decorrelates(self):
        """Test that white noise has small correlation at half length"""
        z = np.random.default_rng(9).normal(size=2000)
        self.assertLess(abs(seg.autocorr(z)[1000]), 0.2)

    def test_zero_signal(self):
        """Test that an all-zero signal has no energy"""
        with self.assertRaisesRegex(SignalError, "no signal energy"):
            seg.autocorr(np.zeros(10))


class TestEstimateCycleLength(unittest.TestCase):
    """Test estimate_cycle_length function"""

    def test_two_step_gait(self):
        """Test that the second maximum is the full cycle, not the step"""
        i = np.arange(300)
        z = 0.5 * np.cos(2 * np.pi * i / 30) + np.cos(4 * np.pi * i / 30)
        delta = seg.estimate_cycle_length(seg.autocorr(z), 27.0)
        self.assertTrue(28 <= delta <= 32)

    def test_pure_sinusoid_second_period(self):
        """Test that a pure sinusoid reports twice its period"""
        z = np.sin(2 * np.pi * np.arange(400) / 20)
        self.assertEqual(seg.estimate_cycle_length(seg.autocorr(z), 27.0), 40)

    def test_aperiodic(self):
        """Test that a constant plus tiny noise is aperiodic"""
        z = 3.0 + 0.01 * np.random.default_rng(2).normal(size=500)
        with self.assertRaisesRegex(SignalError, "aperiodic signal"):
            seg.estimate_cycle_length(seg.autocorr(z), 27.0)

    def test_synthetic_subjects(self):
        """Test |delta - T| <= 2 samples over drawn synthetic subjects"""
        rng = np.random.default_rng(21)
        for params in synth.draw_subjects(20, rng, 0.05, 0.0):
            earth, _ = synth.gen_earth_gait(params, 30.0, 27.0)
            delta = seg.estimate_cycle_length(seg.autocorr(earth[:, 2]), 27.0)
            self.assertLessEqual(abs(delta - params.cycle_s * 27.0), 2.0)


class TestFindNegativePeaks(unittest.TestCase):
    """Test find_negative_peaks function"""

    def test_strict_minima(self):
        """Test the hand-checked example"""
        self.assertEqual(seg.find_negative_peaks([0, -1, 0, -2, 0]).indices, (1, 3))

    def test_monotone(self):
        """Test that a monotone series has no peaks"""
        with self.assertRaises(SignalError):
            seg.find_negative_peaks(np.arange(10.0))

    def test_plateau_not_a_peak(self):
        """Test that a flat-bottomed minimum is not strict"""
        with self.assertRaises(SignalError):
            seg.find_negative_peaks([0, -1, -1, 0])

    def test_too_short(self):
        """Test that fewer than 3 samples is an error"""
        with self.assertRaises(SignalError):
            seg.find_negative_peaks([0, -1])


class TestMagnitudeThreshold(unittest.TestCase):
    """Test magnitude_threshold function"""

    def setUp(self):
        self.z = [0, -2, 0, -4, 0, -6, 0]
        self.peaks = seg.PeakSet(indices=(1, 3, 5))

    def test_mean_minus_std(self):
        """Test mean - tau * sample std"""
        self.assertAlmostEqual(seg.magnitude_threshold(self.z, self.peaks, 1.0), -6.0)

    def test_tau_zero(self):
        """Test that tau = 0 gives the peak mean"""
        self.assertAlmostEqual(seg.magnitude_threshold(self.z, self.peaks, 0.0), -4.0)

    def test_identical_values(self):
        """Test that identical peaks give their common value"""
        z = [0, -3, 0, -3, 0]
        self.assertEqual(seg.magnitude_threshold(z, seg.PeakSet((1, 3)), 2.5), -3.0)


class TestSelectCycleStarts(unittest.TestCase):
    """Test select_cycle_starts function"""

    def setUp(self):
        # deep peaks every 12 samples, three shallow ones inside each cycle
        deep = range(3, 120, 12)
        shallow = [i for d in deep for i in (d + 3, d + 6, d + 9) if i < 119]
        self.z = spiked(120, deep, shallow)
        self.deep = list(deep)
        self.peaks = seg.find_negative_peaks(self.z)

    def test_only_deep_peaks(self):
        """Test that shallow noise peaks are never selected"""
        starts = seg.select_cycle_starts(self.z, self.peaks, 12, 1.0, 3)
        self.assertEqual(list(starts.indices), self.deep)
        self.assertEqual(starts.cycle_len, 12)

    def test_invariants(self):
        """Test membership, magnitude and spacing of every start"""
        starts = seg.select_cycle_starts(self.z, self.peaks, 12, 1.0, 3)
        delta = seg.magnitude_threshold(self.z, self.peaks, 1.0)
        for i in starts.indices:
            self.assertIn(i, self.peaks.indices)
            self.assertLess(self.z[i], delta)
        for gap in np.diff(starts.indices):
            self.assertTrue(9 <= gap <= 15)

    def test_all_shallow(self):
        """Test that equal peaks all fail the strict magnitude test"""
        z = [0, -1, 0, -1, 0, -1, 0]
        with self.assertRaisesRegex(SignalError, "no complete cycle"):
            seg.select_cycle_starts(z, seg.find_negative_peaks(z), 2, 1.0, 0)

    def test_successor_outside_window(self):
        """Test that deep peaks 14 apart with delta 10, eps 2 are rejected"""
        z = spiked(30, (2, 16), (5, 19, 22))
        with self.assertRaisesRegex(SignalError, "no complete cycle"):
            seg.select_cycle_starts(z, seg.find_negative_peaks(z), 10, 1.0, 2)

    def test_peak_is_not_its_own_successor(self):
        """Test that with eps = delta a peak needs a later peak to qualify"""
        z = spiked(30, (8, 11, 20), (2, 4), deep_value=-10.0)
        peaks = seg.find_negative_peaks(z)
        # 20 has no later peak, so the chain reaches it only as the closing start
        starts = seg.select_cycle_starts(z, peaks, 10, 0.0, 10)
        self.assertEqual(starts.indices, (8, 11, 20))

    def test_invalid_arguments(self):
        """Test that a non-positive cycle length is rejected"""
        with self.assertRaises(SignalError):
            seg.select_cycle_starts(self.z, self.peaks, 0, 1.0, 3)


class TestSplitCycles(unittest.TestCase):
    """Test split_cycles function"""

    def test_inclusive_bounds(self):
        """Test that starts 10, 40, 70 give two 31-sample segments"""
        signal = signal_of(np.arange(100.0))
        segments = seg.split_cycles(signal, seg.CycleStarts((10, 40, 70), 30))
        self.assertEqual([len(s) for s in segments], [31, 31])
        self.assertEqual(segments[1].z[0], 40.0)
        self.assertEqual(segments[1].z[-1], 70.0)
        self.assertEqual(segments[1].start_index, 40)

    def test_whole_signal(self):
        """Test that starts {0, N-1} span the whole signal"""
        signal = signal_of(np.arange(50.0))
        segments = seg.split_cycles(signal, seg.CycleStarts((0, 49), 49))
        self.assertEqual(len(segments), 1)
        np.testing.assert_array_equal(segments[0].z, signal.z)


class TestSegment(unittest.TestCase):
    """Test segment on synthetic gait"""

    def test_matches_heel_strikes(self):
        """Test boundaries within 2 samples of the truth over seeds"""
        for seed in range(10):
            z, truth = synthetic_z(seed)
            starts, segments = seg.segment(signal_of(z))
            truth = np.array(truth)
            for i in starts.indices:
                self.assertLessEqual(int(np.abs(truth - i).min()), 2)
            self.assertGreaterEqual(len(segments), len(truth) - 2)

    def test_cycle_length(self):
        """Test the estimated cycle length of the synthetic gait"""
        z, _ = synthetic_z(0)
        starts, _ = seg.segment(signal_of(z))
        self.assertTrue(28 <= starts.cycle_len <= 32)

    def test_white_noise_fails(self):
        """Test that structureless input does not segment"""
        z = 3.0 + 0.01 * np.random.default_rng(2).normal(size=500)
        with self.assertRaises(SignalError):
            seg.segment(signal_of(z))


class TestWriteStartsCsv(unittest.TestCase):
    """Test write_starts_csv function"""

    def test_layout(self):
        """Test the debug dump header and first row"""
        out = io.StringIO()
        seg.write_starts_csv(seg.CycleStarts((0, 27), 27), [-1.5] * 30, 27.0, out)
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0], "index,t_ms,z_value")
        self.assertEqual(lines[1], "0,0.0,-1.5")
        index, t_ms, value = lines[2].split(",")
        self.assertEqual(index, "27")
        self.assertAlmostEqual(float(t_ms), 1000.0, places=9)


if __name__ == '__main__':
    unittest.main()
