# Standard Library Imports
import math
import unittest
from dataclasses import replace

# External Imports
import numpy as np

# Local Imports
from ncvnwsim.errors import InvalidInput, NonConvergence
from ncvnwsim.fet_surrogate import (
    FetGeometry,
    FetParams,
    FetTargets,
    _calibration_metrics,
    apply_workfunction,
    calibrate_fet,
    ids,
    ids_and_q_gate,
    q_gate,
    threshold_voltage,
)


class TestGeometry(unittest.TestCase):
    def test_default_capacitances(self):
        """
        Default geometry gives about 29.3 aF of gate capacitance and 4.88 aF per overlap
        """
        params = FetParams()
        self.assertAlmostEqual(params.c_area / 29.3e-18, 1.0, delta=0.005)
        self.assertAlmostEqual(params.c_ov_s / 4.88e-18, 1.0, delta=0.005)
        self.assertEqual(params.c_ov_s, params.c_ov_d)

    def test_criterion_current(self):
        geom = FetGeometry()
        expected = 100e-9 * math.pi * 6e-9 * 3 / 12e-9
        self.assertAlmostEqual(geom.criterion_current / expected, 1.0, places=12)

    def test_validation(self):
        with self.assertRaises(InvalidInput):
            FetGeometry(l_g=0.0)
        with self.assertRaises(InvalidInput):
            FetGeometry(n_wires=0)
        with self.assertRaises(InvalidInput):
            FetParams(n_slope=0.9)
        with self.assertRaises(InvalidInput):
            FetParams(i_sp=0.0)
        with self.assertRaises(ValueError):
            FetParams(polarity="q")
        with self.assertRaises(InvalidInput):
            FetTargets(ss_target=50.0)
        with self.assertRaises(InvalidInput):
            FetTargets(i_on=1e-9, i_off=1e-8)


class TestSurrogateModel(unittest.TestCase):
    """
    Tests for the drain current and gate charge of the conventional device
    """

    @classmethod
    def setUpClass(cls):
        cls.n = FetParams()
        cls.p = replace(FetParams(), polarity="p")

    def test_zero_drain_bias(self):
        self.assertEqual(ids(self.n, 0.5, 0.0), 0.0)

    def test_monotonic_in_gate(self):
        v = np.linspace(-0.2, 0.8, 201)
        current = ids(self.n, v, np.full_like(v, 0.7))
        self.assertTrue(np.all(np.diff(current) > 0))

    def test_monotonic_in_drain(self):
        v = np.linspace(0.0, 0.8, 161)
        current = ids(self.n, np.full_like(v, 0.7), v)
        self.assertTrue(np.all(np.diff(current) > 0))

    def test_vectorized_matches_scalar(self):
        """
        A bias point gives the same current alone or inside a batch of easier and harder points
        """
        v_gs = np.array([-0.2, 0.1, 0.3, 0.7, 0.8])
        v_ds = np.array([0.7, 0.05, 0.7, 0.7, 0.01])
        batch_i, batch_q = ids_and_q_gate(self.n, v_gs, v_ds)
        for k in range(len(v_gs)):
            single_i, single_q = ids_and_q_gate(self.n, float(v_gs[k]), float(v_ds[k]))
            self.assertAlmostEqual(batch_i[k] / single_i, 1.0, places=12)
            self.assertAlmostEqual(batch_q[k] / single_q, 1.0, places=12)
        # Shrinking the batch does not change the remaining points either
        np.testing.assert_allclose(ids(self.n, v_gs[2:], v_ds[2:]), batch_i[2:], rtol=1e-12, atol=0)

    def test_gummel_symmetry(self):
        """
        With n = 1, no barrier lowering and no series resistance, swapping source and drain reverses the current
        """
        bare = replace(self.n, n_slope=1.0, r_sd=0.0)
        # sigma_dibl equal to the roll-off leaves neither barrier lowering nor a faster drain term
        core = replace(bare, sigma_dibl=bare.dibl_rolloff)
        self.assertEqual(core.barrier_dibl, 0.0)
        self.assertEqual(core.drain_scale, 1.0)
        for v_gs, v_ds in [(0.3, 0.1), (0.6, 0.4), (0.1, -0.2), (0.5, 0.7)]:
            forward = ids(core, v_gs, v_ds)
            backward = ids(core, v_gs - v_ds, -v_ds)
            self.assertAlmostEqual(backward / forward, -1.0, places=12)

    def test_drain_saturation(self):
        """
        Well above threshold the output conductance at v_dd is below 5% of its value at v_ds = 0
        """
        h = 1e-5
        g0 = (ids(self.n, 0.7, h) - ids(self.n, 0.7, 0.0)) / h
        g_sat = (ids(self.n, 0.7, 0.7 + h) - ids(self.n, 0.7, 0.7 - h)) / (2 * h)
        self.assertGreater(g_sat, 0.0)
        self.assertLess(g_sat / g0, 0.05)

    def test_dibl_recovers_parameter(self):
        """
        The constant-current DIBL between 0.05 V and 0.7 V equals sigma_dibl
        """
        for sigma in (0.03, 0.05):
            params = replace(self.n, sigma_dibl=sigma)
            dibl = (threshold_voltage(params, 0.05) - threshold_voltage(params, 0.7)) / 0.65 * 1000.0
            self.assertAlmostEqual(dibl, 1000.0 * sigma, delta=1e-3)

    def test_rolloff_part_of_dibl(self):
        """
        Only the part of sigma_dibl above the linear-region roll-off lowers the threshold
        """
        self.assertGreater(self.n.dibl_rolloff, 0.0)
        self.assertLess(self.n.dibl_rolloff, 0.03)
        self.assertAlmostEqual(self.n.barrier_dibl, 0.03 - self.n.dibl_rolloff, places=15)
        self.assertEqual(self.n.drain_scale, 1.0)
        flat = replace(self.n, sigma_dibl=0.0)
        self.assertEqual(flat.barrier_dibl, 0.0)
        self.assertEqual(flat.dibl_rolloff, self.n.dibl_rolloff)

    def test_small_dibl_speeds_up_drain_term(self):
        """
        A sigma_dibl below the roll-off is met by a faster drain term, still monotonic in v_ds
        """
        params = replace(self.n, sigma_dibl=0.5 * self.n.dibl_rolloff)
        self.assertGreater(params.drain_scale, 1.0)
        self.assertLess(params.drain_scale, 2.0)
        self.assertEqual(params.barrier_dibl, 0.0)
        dibl = (threshold_voltage(params, 0.05) - threshold_voltage(params, 0.7)) / 0.65 * 1000.0
        self.assertAlmostEqual(dibl, 1000.0 * params.sigma_dibl, delta=1e-3)
        v = np.linspace(0.0, 0.8, 161)
        current = ids(params, np.full_like(v, 0.3), v)
        self.assertTrue(np.all(np.diff(current) >= 0))

    def test_p_device_mirrors(self):
        """
        A P device with the same parameters is the point reflection of the N device
        """
        for v_gs, v_ds in [(0.2, 0.05), (0.5, 0.7), (0.7, 0.3)]:
            i_n, q_n = ids_and_q_gate(self.n, v_gs, v_ds)
            i_p, q_p = ids_and_q_gate(self.p, -v_gs, -v_ds)
            self.assertAlmostEqual(i_p / i_n, -1.0, places=12)
            self.assertAlmostEqual(q_p / q_n, -1.0, places=12)

    def test_gate_charge_increases_with_gate(self):
        v = np.linspace(-0.5, 1.0, 151)
        charge = q_gate(self.n, v, np.full_like(v, 0.5))
        self.assertTrue(np.all(np.diff(charge) > 0))

    def test_drain_coupling_sign(self):
        """
        dQ_g/dV_ds is negative above threshold on a 50 x 20 grid
        """
        h = 1e-5
        v_gs = np.linspace(0.35, 0.8, 50)
        v_ds = np.linspace(0.05, 0.7, 20)
        g, d = np.meshgrid(v_gs, v_ds)
        slope = (q_gate(self.n, g, d + h) - q_gate(self.n, g, d - h)) / (2 * h)
        self.assertTrue(np.all(slope < 0))

    def test_series_resistance_limits_current(self):
        ideal = replace(self.n, r_sd=0.0)
        self.assertLess(ids(self.n, 0.7, 0.7), ids(ideal, 0.7, 0.7))

    def test_workfunction_shifts_threshold(self):
        """
        Lowering the gate work function by 0.1 eV lowers V_t of an N device by 0.1 V
        """
        vt = threshold_voltage(self.n, 0.7)
        shifted = apply_workfunction(self.n, self.n.wf_ref - 0.1)
        self.assertAlmostEqual(threshold_voltage(shifted, 0.7), vt - 0.1, delta=1e-9)
        # For P devices the mirrored threshold moves the other way
        p_shifted = apply_workfunction(self.p, self.p.wf_ref - 0.1)
        self.assertAlmostEqual(threshold_voltage(p_shifted, 0.7), vt + 0.1, delta=1e-9)

    def test_p_threshold_mirrors(self):
        self.assertAlmostEqual(threshold_voltage(self.p, 0.7), threshold_voltage(self.n, 0.7), delta=1e-10)


class TestCalibration(unittest.TestCase):
    """
    Tests for calibrate_fet
    """

    @classmethod
    def setUpClass(cls):
        cls.targets = FetTargets()
        cls.params = calibrate_fet(cls.targets, FetParams())
        cls.p_targets = FetTargets(i_on=3e-5)
        cls.p_params = calibrate_fet(cls.p_targets, FetParams(polarity="p"))

    def test_currents(self):
        i_off, i_on, dibl = _calibration_metrics(self.params, self.targets)
        self.assertAlmostEqual(i_off / 1e-8, 1.0, delta=1e-6)
        self.assertAlmostEqual(i_on / 4e-5, 1.0, delta=1e-6)

    def test_dibl(self):
        _, _, dibl = _calibration_metrics(self.params, self.targets)
        self.assertAlmostEqual(dibl, 30.0, delta=1e-3)
        # sigma_dibl is the DIBL target itself, and the roll-off share leaves a positive barrier term
        self.assertEqual(self.params.sigma_dibl, 0.03)
        self.assertGreater(self.params.barrier_dibl, 0.0)
        self.assertEqual(self.params.v_dibl, 0.7)

    def test_p_device_dibl(self):
        _, _, dibl = _calibration_metrics(self.p_params, self.p_targets)
        self.assertAlmostEqual(dibl, 30.0, delta=1e-3)

    def test_dibl_below_rolloff(self):
        """
        A DIBL target smaller than the linear-region roll-off cannot be reached
        """
        with self.assertRaises(NonConvergence) as ctx:
            calibrate_fet(FetTargets(dibl_target=0.5), FetParams())
        self.assertEqual(ctx.exception.context["target"], "dibl")

    def test_slope_factor(self):
        """
        n_slope follows from SS = n·phi_t·ln 10
        """
        self.assertAlmostEqual(
            self.params.n_slope * self.params.phi_t * math.log(10) * 1000, 68.0, places=9
        )

    def test_subthreshold_slope(self):
        v = np.linspace(-0.2, 0.0, 41)
        current = ids(self.params, v, np.full_like(v, 0.7))
        ss = 1000 * np.diff(v) / np.diff(np.log10(current))
        self.assertAlmostEqual(float(np.min(ss)), 68.0, delta=0.5)

    def test_p_device(self):
        i_off, i_on, _ = _calibration_metrics(self.p_params, self.p_targets)
        self.assertEqual(self.p_params.polarity, "p")
        self.assertAlmostEqual(i_on / 3e-5, 1.0, delta=1e-6)
        self.assertLess(ids(self.p_params, -0.7, -0.7), 0.0)

    def test_fixed_point(self):
        """
        Calibrating an already calibrated device returns it unchanged
        """
        again = calibrate_fet(self.targets, self.params)
        self.assertIs(again, self.params)

    def test_keeps_seed_settings(self):
        seed = FetParams(r_sd=2000.0, wf=4.2, wf_ref=4.28)
        params = calibrate_fet(self.targets, seed)
        self.assertEqual(params.r_sd, 2000.0)
        self.assertEqual(params.wf, 4.2)

    def test_invalid_ratio(self):
        with self.assertRaises(InvalidInput):
            calibrate_fet(FetTargets(i_off=1e-8, i_on=5e-8), FetParams())


if __name__ == "__main__":
    unittest.main()
