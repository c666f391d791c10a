import csv
import math
import tempfile
import unittest

from pathlib import Path
from unittest import mock

import numpy as np

from exit_wave import (FocusSeries, GridSpec, OpticalParams, RealField, StorageError, SyntheticWaveSpec,
                       ValidationError, make_synthetic_wave, simulate_series)
from exit_wave.analysis import (LineSampling, ProbeReport, TAIL_LIMIT, cell_averaged_profile, coercivity_probe,
                                coercivity_probe_2d, convexity_sweep, factorization_sweep, format_summary,
                                invariance_suite, tail_estimate, write_report)
from exit_wave.forward import Atom
from exit_wave.tcc import build_kernels

FOCI = (-10.0, -8.5, -7.0)
DRIFTS = ((0.0, 0.0), (0.0117, 0.0039), (0.0234, 0.0078))
SMALL_OPTICS = OpticalParams(alpha_max_rad=0.05)


def small_problem():
    spec = GridSpec(32, 0.25)
    wave = SyntheticWaveSpec((Atom((0.03, -0.02), 0.8, 0.015, -0.1), Atom((-0.07, 0.06), 0.4, 0.02, 0.05)),
                             1.0, spec.extent_nm)
    psi_large = make_synthetic_wave(spec.doubled(), wave, SMALL_OPTICS)
    series = simulate_series(psi_large, FOCI, DRIFTS, SMALL_OPTICS, n_focal=3)
    return series, build_kernels(spec, FOCI, SMALL_OPTICS, n_focal=3)


class TestCoercivity(unittest.TestCase):
    def test_profile_averages(self):
        edges = np.array([0.0, 1.0, 4.0, 9.0, 20.0])
        np.testing.assert_allclose(cell_averaged_profile(edges, 9.0), [0.0, 2.0 / 3.0, 0.4, 0.0])

    def test_counterexample_family(self):
        report = coercivity_probe()
        self.assertEqual(report.verdict, "PASS")
        self.assertEqual(len(report.rows), 3)
        norms = [row["norm_sq"] for row in report.rows]
        self.assertTrue(norms[0] < norms[1] < norms[2])
        for row in report.rows:
            self.assertGreaterEqual(row["square_norm"], 0.25)
            self.assertLessEqual(row["square_norm"], 4.0)
            self.assertLessEqual(row["tail_bound"], 1e-6)

    def test_norm_grows_like_the_logarithm(self):
        rows = coercivity_probe((100.0, 1000.0)).rows
        growth = rows[1]["norm_sq"] - rows[0]["norm_sq"]
        self.assertLess(abs(growth - math.log(10.0)), 0.25 * math.log(10.0))

    def test_tail_bound_column(self):
        report = coercivity_probe()
        self.assertEqual(report.columns[-1], "tail_bound")
        for row in report.rows:
            self.assertGreater(row["tail_bound"], 0.0)
            self.assertLessEqual(row["tail_bound"], TAIL_LIMIT)

    def test_tail_estimate(self):
        samples = np.array([0.0, 1.0, 0.5, 0.5, 0.0])
        self.assertAlmostEqual(tail_estimate(samples, 100.0), 2.0 * 2.0 / (math.pi ** 2 * 100.0), places=15)
        self.assertEqual(tail_estimate(np.zeros(4), 1.0), 0.0)

    def test_narrow_margin_is_refused(self):
        with self.assertRaises(ValidationError):
            coercivity_probe(sampling=LineSampling(margin=1000.0))

    def test_sampled_profile_must_match_the_logarithm(self):
        exact = cell_averaged_profile

        def inflated(edges, delta):
            return 1.5 * exact(edges, delta)

        with mock.patch("exit_wave.analysis.cell_averaged_profile", side_effect=inflated):
            report = coercivity_probe((10.0, 100.0))
        self.assertEqual(report.verdict, "FAIL")
        self.assertTrue(any("ln δ" in note for note in report.notes))
        self.assertGreater(report.rows[1]["norm_sq"], 2.0 * math.log(100.0))

    def test_invalid_widths(self):
        for deltas in ((10.0,), (10.0, 5.0), (0.5, 10.0), (10.0, float("inf"))):
            with self.subTest(deltas=deltas):
                with self.assertRaises(ValidationError):
                    coercivity_probe(deltas)

    def test_invalid_sampling(self):
        for kwargs in ({"step": 0.3}, {"step": 0.25}, {"step": 0.0}, {"margin": 0.0}, {"margin": float("nan")}):
            with self.subTest(**kwargs):
                with self.assertRaises(ValidationError):
                    LineSampling(**kwargs)

    def test_lattice_version(self):
        report = coercivity_probe_2d()
        self.assertTrue(report.passed)
        self.assertEqual(report.name, "coercivity-2d")


class TestFactorizationSweep(unittest.TestCase):
    def test_production_error_shrinks(self):
        p = OpticalParams(alpha_max_rad=0.032, delta_nm=3.0)
        report = factorization_sweep(-10.0, p, node_counts=(3, 7, 15), pairs=300)
        self.assertTrue(report.passed)
        self.assertLess(report.rows[-1]["max_error"], 1e-2)

    def test_coherent_single_node_is_exact(self):
        report = factorization_sweep(-10.0, SMALL_OPTICS, node_counts=(1,), pairs=100)
        self.assertTrue(report.passed)
        self.assertLessEqual(report.rows[0]["max_error"], 1e-12)

    def test_oracle_error_shrinks(self):
        p = OpticalParams(alpha_max_rad=0.05, delta_nm=1.0, alpha_conv_rad=5e-4)
        report = factorization_sweep(-10.0, p, node_counts=(2, 4, 8), path="oracle", pairs=200)
        self.assertEqual(report.name, "factorization-oracle")
        self.assertTrue(report.passed)

    def test_invalid_arguments(self):
        with self.assertRaises(ValidationError):
            factorization_sweep(0.0, SMALL_OPTICS, path="exact")
        with self.assertRaises(ValidationError):
            factorization_sweep(0.0, SMALL_OPTICS, node_counts=())
        with self.assertRaises(ValidationError):
            factorization_sweep(0.0, SMALL_OPTICS, pairs=0)


class TestSeriesProbes(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.series, cls.kernels = small_problem()

    def test_invariances_hold(self):
        report = invariance_suite(self.series, self.kernels, trials=4)
        self.assertTrue(report.passed)
        self.assertEqual(len(report.rows), 8)
        self.assertEqual(report.rows[0]["relative_change"], 0.0)

    def test_invariance_needs_two_trials(self):
        with self.assertRaises(ValidationError):
            invariance_suite(self.series, self.kernels, trials=1)

    def test_energy_is_not_convex_at_the_origin(self):
        report = convexity_sweep(self.series, self.kernels)
        self.assertEqual(report.verdict, "FAIL")
        self.assertEqual(report.notes, ())
        self.assertLessEqual(report.rows[-1]["relative_gap"], 0.05)
        for row in report.rows:
            self.assertLess(row["c2"], 0.0)

    def test_zero_series_is_flat(self):
        spec = self.series.spec
        zero = RealField(spec, np.zeros((spec.n, spec.n)))
        series = FocusSeries((zero,) * 3, FOCI, DRIFTS, SMALL_OPTICS, spec)
        report = convexity_sweep(series, self.kernels)
        self.assertTrue(report.passed)
        self.assertEqual(report.rows[0]["limit"], 0.0)

    def test_convexity_needs_widths(self):
        with self.assertRaises(ValidationError):
            convexity_sweep(self.series, self.kernels, widths=())


class TestReports(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.report = ProbeReport("demo", "x below 1", ("x", "y"), ({"x": 0.5, "y": 2.0}, {"x": 0.25, "y": 3.0}),
                                  True, ("a remark",))

    def tearDown(self):
        self.tmp.cleanup()

    def test_write_report(self):
        path = Path(self.tmp.name) / "probes" / "demo.csv"
        write_report(self.report, path)
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(rows, [["x", "y"], ["0.5", "2.0"], ["0.25", "3.0"]])

    def test_unwritable_report(self):
        blocker = Path(self.tmp.name) / "file"
        blocker.write_text("", encoding="utf-8")
        with self.assertRaises(StorageError):
            write_report(self.report, blocker / "demo.csv")

    def test_summary(self):
        text = format_summary(self.report)
        lines = text.splitlines()
        self.assertEqual(lines[0], "probe: demo")
        self.assertIn("note: a remark", lines)
        self.assertEqual(lines[-1], "verdict: PASS")
        failed = ProbeReport("demo", "x below 1", ("x",), ({"x": 2.0},), False)
        self.assertTrue(format_summary(failed).endswith("verdict: FAIL"))


if __name__ == '__main__':
    unittest.main()
