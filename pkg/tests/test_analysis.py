# Standard Library Imports
import math
import unittest

# External Imports
import numpy as np
import pandas as pd

# Local Imports
from ncvnwsim.analysis import (
    DeviceMetrics,
    detect_ndr,
    device_metrics,
    extract_dibl,
    extract_ss,
    extract_vt,
    hysteresis_width,
    saturation_check,
    ss_curve,
)
from ncvnwsim.errors import CriterionNotCrossed, WindowEmpty
from ncvnwsim.fet_surrogate import FetParams, FetTargets, calibrate_fet
from ncvnwsim.ferroelectric import FerroGeometry, LkModel, calibrate_lk
from ncvnwsim.nc_device import NcFet, sweep_idvd
from ncvnwsim.utils import NM2


def _transfer_frame(v_ds: float, shift: float = 0.0, ss_mv: float = 60.0) -> pd.DataFrame:
    """
    Exponential transfer curve with the given slope, 1 pA at v_gs = -shift
    """
    v = np.round(np.arange(0.0, 0.601, 0.01), 10)
    i = 1e-12 * 10 ** ((v + shift) / (ss_mv * 1e-3))
    return pd.DataFrame({"v_gs_V": v, "v_ds_V": np.full_like(v, v_ds), "i_ds_A": i})


def _output_frame(current) -> pd.DataFrame:
    current = np.asarray(current, dtype=float)
    v = np.linspace(0.0, 0.1 * (current.size - 1), current.size)
    return pd.DataFrame({"v_gs_V": np.full_like(v, 0.7), "v_ds_V": v, "i_ds_A": current})


class TestSubthresholdSlope(unittest.TestCase):
    def test_exponential_curve(self):
        self.assertAlmostEqual(extract_ss(_transfer_frame(0.7)), 60.0, places=6)
        self.assertAlmostEqual(extract_ss(_transfer_frame(0.7, ss_mv=75.0)), 75.0, places=6)

    def test_descending_rows(self):
        """
        Row order does not matter
        """
        frame = _transfer_frame(0.7).iloc[::-1].reset_index(drop=True)
        self.assertAlmostEqual(extract_ss(frame), 60.0, places=6)

    def test_empty_window(self):
        with self.assertRaises(WindowEmpty):
            extract_ss(_transfer_frame(0.7), i_lo=1.0, i_hi=2.0)

    def test_ss_curve(self):
        curve = ss_curve(_transfer_frame(0.7), 1e-11, 1e-7)
        self.assertEqual(list(curve.columns), ["v_gs_V", "i_ds_A", "ss_mV_dec"])
        self.assertTrue(np.all(curve["i_ds_A"] >= 1e-11))
        self.assertTrue(np.all(curve["i_ds_A"] <= 1e-7))
        np.testing.assert_allclose(curve["ss_mV_dec"], 60.0, rtol=1e-9)


class TestThreshold(unittest.TestCase):
    def test_explicit_criterion(self):
        """
        1 nA is reached three decades above 1 pA, at 180 mV
        """
        self.assertAlmostEqual(extract_vt(_transfer_frame(0.7), i_crit=1e-9), 0.18, delta=1e-9)

    def test_default_criterion(self):
        frame = _transfer_frame(0.7)
        expected = 0.06 * math.log10(100e-9 * math.pi * 6e-9 * 3 / 12e-9 / 1e-12)
        self.assertAlmostEqual(extract_vt(frame), expected, delta=1e-9)

    def test_not_crossed(self):
        with self.assertRaises(CriterionNotCrossed):
            extract_vt(_transfer_frame(0.7), i_crit=1.0)


class TestDibl(unittest.TestCase):
    def test_positive(self):
        """
        A threshold drop of 19.5 mV between 0.05 V and 0.7 V is 30 mV/V
        """
        lin = _transfer_frame(0.05)
        sat = _transfer_frame(0.7, shift=0.0195)
        self.assertAlmostEqual(extract_dibl(lin, sat, i_crit=1e-9), 30.0, delta=1e-6)

    def test_negative(self):
        lin = _transfer_frame(0.05)
        sat = _transfer_frame(0.7, shift=-0.0195)
        self.assertAlmostEqual(extract_dibl(lin, sat, i_crit=1e-9), -30.0, delta=1e-6)

    def test_equal_thresholds(self):
        lin = _transfer_frame(0.05)
        self.assertEqual(extract_dibl(lin, _transfer_frame(0.7), i_crit=1e-9), 0.0)


class TestHysteresis(unittest.TestCase):
    def test_identical_sweeps(self):
        up = _transfer_frame(0.7)
        down = up.iloc[::-1].reset_index(drop=True)
        self.assertEqual(hysteresis_width(up, down), 0.0)

    def test_shifted_sweeps(self):
        """
        A down sweep shifted 20 mV to lower gate voltage gives 20 mV of hysteresis
        """
        up = _transfer_frame(0.7)
        down = _transfer_frame(0.7, shift=0.02).iloc[::-1].reset_index(drop=True)
        self.assertAlmostEqual(hysteresis_width(up, down), 0.02, delta=1e-9)

    def test_no_common_range(self):
        up = _transfer_frame(0.7)
        with self.assertRaises(WindowEmpty):
            hysteresis_width(up, up, i_lo=1.0, i_hi=10.0)


class TestOutputCharacteristic(unittest.TestCase):
    def test_ndr_interval(self):
        frame = _output_frame([0.0, 1.0, 2.0, 3.0, 2.5, 2.0, 2.2, 2.4])
        intervals = detect_ndr(frame)
        self.assertEqual(len(intervals), 1)
        self.assertAlmostEqual(intervals[0][0], 0.3)
        self.assertAlmostEqual(intervals[0][1], 0.5)

    def test_ndr_at_end(self):
        frame = _output_frame([0.0, 1.0, 2.0, 1.5])
        intervals = detect_ndr(frame)
        self.assertEqual(len(intervals), 1)
        self.assertAlmostEqual(intervals[0][1], 0.3)

    def test_monotone_curve(self):
        self.assertEqual(detect_ndr(_output_frame([0.0, 1.0, 1.5, 1.7, 1.8])), [])

    def test_saturating_curve(self):
        v = np.round(np.arange(0.0, 0.701, 0.01), 10)
        frame = pd.DataFrame(
            {
                "v_gs_V": np.full_like(v, 0.7),
                "v_ds_V": v,
                "i_ds_A": 1e-5 * (1 - np.exp(-v / 0.05)),
                "v_int_V": np.full_like(v, 0.6),
            }
        )
        result = saturation_check(frame, 0.7, v_t=0.2)
        self.assertTrue(result.saturates)
        self.assertLess(result.gds_ratio, 1e-4)
        self.assertAlmostEqual(result.v_int_at_vdd, 0.6)
        self.assertAlmostEqual(result.v_dsat_estimate, 0.4)

    def test_linear_curve(self):
        v = np.round(np.arange(0.0, 0.701, 0.01), 10)
        frame = pd.DataFrame({"v_gs_V": np.full_like(v, 0.7), "v_ds_V": v, "i_ds_A": 1e-6 * v})
        result = saturation_check(frame, 0.7)
        self.assertFalse(result.saturates)
        self.assertAlmostEqual(result.gds_ratio, 1.0, places=6)
        self.assertIsNone(result.v_int_at_vdd)


class TestDeviceTrends(unittest.TestCase):
    """
    Metrics of calibrated devices as the ferroelectric area shrinks
    """

    AREAS_NM2 = [2000.0, 1000.0, 700.0, 500.0]

    @classmethod
    def setUpClass(cls):
        fet = calibrate_fet(FetTargets(), FetParams())
        lk = LkModel(calibrate_lk(0.17, 1.1e8), FerroGeometry(5e-9, 500 * NM2))
        cls.conventional = device_metrics(NcFet(fet), 0.7, step=0.002)
        cls.metrics = [
            device_metrics(NcFet(fet, lk.with_area(a * NM2)), 0.7, step=0.002)
            for a in cls.AREAS_NM2
        ]

    def _series(self, name):
        return np.array([getattr(m, name) for m in self.metrics])

    def test_conventional_matches_calibration(self):
        self.assertAlmostEqual(self.conventional.i_on / 4e-5, 1.0, delta=1e-4)
        self.assertAlmostEqual(self.conventional.i_off / 1e-8, 1.0, delta=1e-4)
        self.assertAlmostEqual(self.conventional.dibl, 30.0, delta=0.5)
        # The window starts at I_off, where the curve is already bending towards threshold
        self.assertGreater(self.conventional.ss_min, 67.5)
        self.assertLess(self.conventional.ss_min, 90.0)
        self.assertEqual(self.conventional.hysteresis, 0.0)

    def test_subthreshold_slope_falls(self):
        ss = self._series("ss_min")
        self.assertTrue(np.all(np.diff(ss) < 0))
        self.assertLess(ss[0], self.conventional.ss_min)
        self.assertLess(ss[-1], 60.0)

    def test_threshold_rises(self):
        v_t = self._series("v_t")
        self.assertTrue(np.all(np.diff(v_t) > 0))
        self.assertGreater(v_t[0], self.conventional.v_t)

    def test_currents(self):
        """
        Smaller ferroelectrics raise the on current and lower the off current
        """
        self.assertTrue(np.all(np.diff(self._series("i_on")) > 0))
        self.assertTrue(np.all(np.diff(self._series("i_off")) < 0))

    def test_dibl_changes_sign(self):
        self.assertGreater(self.conventional.dibl, 0.0)
        self.assertLess(self.metrics[-1].dibl, 0.0)

    def test_no_hysteresis_above_critical_area(self):
        self.assertLess(self.metrics[-1].hysteresis, 1e-3)

    def test_to_frame(self):
        frame = self.conventional.to_frame()
        self.assertEqual(
            list(frame.columns),
            ["ss_mV_dec", "v_t_V", "dibl_mV_V", "hysteresis_V", "i_on_A", "i_off_A"],
        )
        self.assertIsInstance(self.conventional, DeviceMetrics)


class TestDeviceNdr(unittest.TestCase):
    """
    Drain coupling through the ferroelectric bends the subthreshold output curve down
    """

    @classmethod
    def setUpClass(cls):
        cls.fet = calibrate_fet(FetTargets(), FetParams())
        cls.lk = LkModel(calibrate_lk(0.17, 1.1e8), FerroGeometry(5e-9, 500 * NM2))

    def test_nc_device_has_ndr(self):
        table = sweep_idvd(NcFet(self.fet, self.lk), 0.0, 0.7, 0.005, 0.1)
        self.assertGreaterEqual(len(detect_ndr(table)), 1)

    def test_conventional_device_is_monotone(self):
        table = sweep_idvd(NcFet(self.fet), 0.0, 0.7, 0.005, 0.1)
        self.assertEqual(detect_ndr(table), [])


class TestPDeviceMetrics(unittest.TestCase):
    def test_mirrored_metrics(self):
        """
        P-device metrics are reported in the mirrored frame, with positive currents
        """
        targets = FetTargets(i_on=3e-5)
        fet = calibrate_fet(targets, FetParams(polarity="p"))
        metrics = device_metrics(NcFet(fet), 0.7, step=0.002)
        self.assertAlmostEqual(metrics.i_on / 3e-5, 1.0, delta=1e-4)
        self.assertAlmostEqual(metrics.i_off / 1e-8, 1.0, delta=1e-4)
        self.assertAlmostEqual(metrics.dibl, 30.0, delta=0.5)


if __name__ == "__main__":
    unittest.main()
