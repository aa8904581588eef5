# Standard Library Imports
import pickle
import unittest
import warnings

# External Imports
import numpy as np

# Local Imports
from ncvnwsim.errors import InvalidInput, NonConvergence, PredicateNotBracketed, ValidationError
from ncvnwsim.fet_surrogate import FetParams, FetTargets, calibrate_fet, ids, q_gate
from ncvnwsim.ferroelectric import FerroGeometry, LkModel, Mode, Quadrant, calibrate_lk
from ncvnwsim.nc_device import (
    SWEEP_COLUMNS,
    NcFet,
    _q_zero_voltage,
    attractor_estimate,
    critical_area,
    find_all_roots,
    has_hysteresis,
    run_concurrently,
    solve_static,
    sweep_idvd,
    sweep_idvg,
    v_int_from_charge,
)
from ncvnwsim.utils import NM2

AREAS_NM2 = [2000.0, 1000.0, 700.0, 500.0]


def _fail_at(v_dd: float):
    raise NonConvergence("step limit").with_context(v_dd=v_dd)


def _device(area_nm2: float) -> NcFet:
    fet = calibrate_fet(FetTargets(), FetParams())
    lk = LkModel(calibrate_lk(0.17, 1.1e8), FerroGeometry(5e-9, area_nm2 * NM2))
    return NcFet(fet, lk)


class TestNcFet(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.dev = _device(500.0)

    def test_with_area(self):
        bigger = self.dev.with_area(1000 * NM2)
        self.assertEqual(bigger.lk.geom.a_fe, 1000 * NM2)
        self.assertIs(bigger.fet, self.dev.fet)
        self.assertTrue(self.dev.with_area(0).is_conventional)
        with self.assertRaises(InvalidInput):
            NcFet(self.dev.fet).with_area(500 * NM2)

    def test_conventional_solve(self):
        """
        Without a ferroelectric the internal gate is the external gate
        """
        conv = NcFet(self.dev.fet)
        point = solve_static(conv, 0.4, 0.7)
        self.assertEqual(point.v_int, 0.4)
        self.assertEqual(point.v_fe, 0.0)
        self.assertIsNone(point.region)
        self.assertEqual(point.i_ds, ids(self.dev.fet, 0.4, 0.7))

    def test_bias_range(self):
        with self.assertRaises(InvalidInput):
            solve_static(self.dev, 2.5, 0.7)
        with self.assertRaises(InvalidInput):
            find_all_roots(self.dev, 0.5, -2.1)


class TestSelfConsistentSolve(unittest.TestCase):
    """
    Tests for solve_static and find_all_roots
    """

    @classmethod
    def setUpClass(cls):
        cls.stable = _device(500.0)
        cls.bistable = _device(100.0)

    def test_coupling_residual_vanishes(self):
        point = solve_static(self.stable, 0.3, 0.7)
        self.assertAlmostEqual(point.v_int + point.v_fe, 0.3, delta=1e-9)
        self.assertAlmostEqual(point.q / q_gate(self.stable.fet, point.v_int, 0.7), 1.0, places=9)

    def test_single_root_when_matched(self):
        roots = find_all_roots(self.stable, 0.3, 0.7)
        self.assertEqual(len(roots), 1)
        self.assertFalse(roots[0].multiple_roots)

    def test_multiple_roots_when_bistable(self):
        """
        At the zero-charge gate voltage a bistable device has an unstable middle root and two stable ones
        """
        v_zero = _q_zero_voltage(self.bistable.fet, 0.7)
        roots = find_all_roots(self.bistable, v_zero, 0.7)
        self.assertGreaterEqual(len(roots), 3)
        self.assertEqual(len(roots) % 2, 1)
        self.assertTrue(all(r.multiple_roots for r in roots))
        # Fresh up and down solves take the lowest and the highest root
        self.assertAlmostEqual(solve_static(self.bistable, v_zero, 0.7, direction="down").v_int, roots[-1].v_int)
        self.assertAlmostEqual(solve_static(self.bistable, v_zero, 0.7, direction="up").v_int, roots[0].v_int)

    def test_solver_agrees_with_scan(self):
        """
        Every Newton root appears in the grid-scan root list, for stable and bistable devices
        """
        rng = np.random.default_rng(7)
        for dev in (self.stable, self.bistable):
            for _ in range(50):
                v_gs = float(rng.uniform(-0.2, 0.9))
                v_ds = float(rng.uniform(0.0, 0.8))
                guess = float(rng.uniform(-0.5, 1.0))
                roots = [r.v_int for r in find_all_roots(dev, v_gs, v_ds)]
                for point in (
                    solve_static(dev, v_gs, v_ds),
                    solve_static(dev, v_gs, v_ds, guess=guess),
                ):
                    distance = min(abs(point.v_int - r) for r in roots)
                    self.assertLess(distance, 1e-7, "v_gs=%g v_ds=%g" % (v_gs, v_ds))

    def test_conventional_limit(self):
        """
        A very large ferroelectric leaves the bare device characteristic unchanged
        """
        dev = self.stable.with_area(1e8 * NM2)
        table = sweep_idvg(dev, 0.0, 0.7, 0.001, 0.7, "up")
        v = table.column("v_gs")
        np.testing.assert_allclose(
            table.column("i_ds"), ids(dev.fet, v, np.full_like(v, 0.7)), rtol=1e-3
        )

    def test_v_int_from_charge(self):
        fet = self.stable.fet
        for v in (-0.3, 0.1, 0.5, 0.9):
            charge = q_gate(fet, v, 0.7)
            self.assertAlmostEqual(v_int_from_charge(fet, charge, 0.7), v, delta=1e-9)
            self.assertAlmostEqual(v_int_from_charge(fet, charge, 0.7, guess=0.0), v, delta=1e-9)


class TestSweeps(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.dev = _device(500.0)
        cls.up = sweep_idvg(cls.dev, 0.0, 0.7, 0.01, 0.7, "up")
        cls.down = sweep_idvg(cls.dev, 0.0, 0.7, 0.01, 0.7, "down")

    def test_order_and_columns(self):
        frame = self.up.to_frame()
        self.assertEqual(list(frame.columns), SWEEP_COLUMNS)
        self.assertEqual(len(frame), 71)
        self.assertTrue(np.all(np.diff(self.up.column("v_gs")) > 0))
        self.assertTrue(np.all(np.diff(self.down.column("v_gs")) < 0))
        self.assertEqual(self.down.direction, "down")

    def test_matched_device_has_no_hysteresis(self):
        np.testing.assert_allclose(
            self.up.column("i_ds"), self.down.column("i_ds")[::-1], rtol=1e-6
        )

    def test_internal_gate_amplified_above_attractor(self):
        """
        Above the attractor the ferroelectric voltage is negative, so the internal gate exceeds the external gate
        """
        v_gs = self.up.column("v_gs")
        v_int = self.up.column("v_int")
        high = v_gs > 0.4
        self.assertTrue(np.all(v_int[high] > v_gs[high]))

    def test_output_sweep(self):
        table = sweep_idvd(self.dev, 0.0, 0.7, 0.01, 0.5)
        self.assertEqual(table.variable, "v_ds")
        self.assertEqual(table.v_gs, 0.5)
        v_ds = table.column("v_ds")
        self.assertTrue(np.all(np.diff(v_ds) > 0))
        self.assertEqual(table.column("i_ds")[0], 0.0)

    def test_hysteretic_device(self):
        """
        A ferroelectric much smaller than the critical area opens a hysteresis loop
        """
        dev = self.dev.with_area(100 * NM2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.assertTrue(has_hysteresis(dev, 0.7, step=0.002))
        self.assertFalse(has_hysteresis(self.dev, 0.7, step=0.002))

    def test_run_concurrently_keeps_order(self):
        self.assertEqual(run_concurrently(lambda x: x * x, [3, 1, 2], max_workers=3), [9, 1, 4])

    def test_run_in_processes_keeps_order(self):
        self.assertEqual(run_concurrently(abs, [-3, 1, -2], max_workers=2, processes=True), [3, 1, 2])

    def test_worker_error_keeps_context(self):
        with self.assertRaises(NonConvergence) as ctx:
            run_concurrently(_fail_at, [0.4, 0.5], max_workers=2, processes=True)
        self.assertIn(ctx.exception.context["v_dd"], (0.4, 0.5))
        self.assertEqual(ctx.exception.message, "step limit")

    def test_errors_pickle(self):
        err = pickle.loads(pickle.dumps(NonConvergence("step limit").with_context(v_dd=0.5)))
        self.assertEqual(err.context, {"v_dd": 0.5})
        self.assertEqual(str(err), "step limit [v_dd=0.5]")
        bad = pickle.loads(pickle.dumps(ValidationError("ferro.t_fe_nm", "must be positive")))
        self.assertIsInstance(bad, ValidationError)
        self.assertEqual(str(bad), str(ValidationError("ferro.t_fe_nm", "must be positive")))


class TestAttractorAndCriticalArea(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        dev = _device(500.0)
        cls.dev = dev
        cls.result = attractor_estimate(dev.fet, dev.lk, AREAS_NM2, 0.7)

    def test_attractor_invariance(self):
        """
        Transfer curves of every area cross at one gate voltage, where the gate charge vanishes
        """
        self.assertEqual(len(self.result.crossings), len(AREAS_NM2) - 1)
        self.assertLess(self.result.spread, 2e-3)
        self.assertLess(abs(self.result.v_a - self.result.q_zero_v), 2e-3)
        self.assertGreater(self.result.v_a, 0.0)
        self.assertLess(self.result.v_a, 0.7)

    def test_quadrants_around_attractor(self):
        """
        Below the zero-charge gate voltage the ferroelectric sits in quadrant IV, above it in quadrant II
        """
        table = sweep_idvg(self.dev, 0.0, 0.7, 0.01, 0.7, "up")
        below = [row for row in table.rows if row.v_gs < self.result.q_zero_v - 5e-3]
        above = [row for row in table.rows if row.v_gs > self.result.q_zero_v + 5e-3]
        self.assertTrue(below and above)
        self.assertEqual({row.region.quadrant for row in below}, {Quadrant.IV})
        self.assertEqual({row.region.quadrant for row in above}, {Quadrant.II})

    def test_mode_matches_gate_amplification(self):
        """
        Diminution rows have the internal gate below the external gate, Amplification rows above it
        """
        for v_ds in (0.05, 0.7):
            for row in sweep_idvg(self.dev, 0.0, 0.7, 0.01, v_ds, "up").rows:
                if row.region.mode == Mode.DIMINUTION:
                    self.assertLess(row.v_int, row.v_gs + 1e-9)
                else:
                    self.assertGreater(row.v_int, row.v_gs - 1e-9)

    def test_attractor_needs_two_areas(self):
        with self.assertRaises(InvalidInput):
            attractor_estimate(self.dev.fet, self.dev.lk, [500.0], 0.7)

    def test_critical_area(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            area = critical_area(self.dev, 50.0, 2000.0, 0.7, step=0.002)
            self.assertGreater(area, 50.0)
            self.assertLess(area, 500.0)
            self.assertTrue(has_hysteresis(self.dev.with_area(0.9 * area * NM2), 0.7, step=0.002))
            self.assertFalse(has_hysteresis(self.dev.with_area(1.1 * area * NM2), 0.7, step=0.002))

    def test_critical_area_grows_for_weaker_ferroelectric(self):
        """
        A lower remnant polarization at the same coercive field needs a larger area to stay hysteresis-free
        """
        weak = NcFet(self.dev.fet, LkModel(calibrate_lk(0.12, 1.1e8), FerroGeometry(5e-9, 500 * NM2)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            strong_area = critical_area(self.dev, 50.0, 2000.0, 0.7, step=0.002)
            weak_area = critical_area(weak, 50.0, 4000.0, 0.7, step=0.002)
        self.assertGreater(weak_area, 1.1 * strong_area)

    def test_critical_area_not_bracketed(self):
        with self.assertRaises(PredicateNotBracketed):
            critical_area(self.dev, 1000.0, 2000.0, 0.7, step=0.01)


if __name__ == "__main__":
    unittest.main()
