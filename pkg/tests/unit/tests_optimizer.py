import csv
import tempfile
import unittest

from pathlib import Path

import numpy as np

from exit_wave import (ComplexField, FocusSeries, GridSpec, OpticalParams, RealField, ReconstructionVariables,
                       SolverConfig, Space, StopReason, StorageError, SyntheticWaveSpec, ValidationError,
                       initial_variables, make_synthetic_wave, minimize, simulate_series)
from exit_wave.fields import l2_norm, modulate
from exit_wave.forward import Atom, crop_wave
from exit_wave.objective import Objective, RegularizerSpec
from exit_wave.optimizer import (LOG_COLUMNS, GroundTruth, Minimizer, auto_translation_scale, gauge_align, init_wave,
                                 init_translations, translation_errors, wave_errors, write_log)
from exit_wave.tcc import build_kernels

FOCI = (-10.0, -8.5, -7.0)
DRIFTS = ((0.0, 0.0), (0.0117, 0.0039), (0.0234, 0.0078))
SMALL_OPTICS = OpticalParams(alpha_max_rad=0.05)


def two_atom_wave(spec):
    return SyntheticWaveSpec((Atom((0.03, -0.02), 0.8, 0.015, -0.1), Atom((-0.07, 0.06), 0.4, 0.02, 0.05)),
                             1.0, spec.extent_nm)


def small_problem():
    spec = GridSpec(32, 0.25)
    psi_large = make_synthetic_wave(spec.doubled(), two_atom_wave(spec), SMALL_OPTICS)
    series = simulate_series(psi_large, FOCI, DRIFTS, SMALL_OPTICS, n_focal=3)
    kernels = build_kernels(spec, FOCI, SMALL_OPTICS, n_focal=3)
    return series, kernels, crop_wave(psi_large, spec, SMALL_OPTICS)


class TestSolverConfig(unittest.TestCase):
    def test_defaults(self):
        cfg = SolverConfig()
        self.assertEqual(cfg.alpha, 1e-5)
        self.assertEqual(cfg.epsilon_stop, 1e-10)
        self.assertEqual(cfg.max_iters, 1000)
        self.assertEqual(cfg.restart_period, 50)
        self.assertIsNone(cfg.translation_bound_nm)

    def test_invalid_settings(self):
        bad = [
            {"alpha": -1.0},
            {"alpha": float("nan")},
            {"epsilon_stop": 0.0},
            {"max_iters": -1},
            {"armijo_sigma": 1.0},
            {"armijo_backtrack": 0.0},
            {"armijo_initial_step": 0.0},
            {"armijo_max_backtracks": 0},
            {"restart_period": 0},
            {"translation_bound_nm": 0.0},
            {"translation_scale_nm": -0.1},
            {"freeze_translations": True, "freeze_wave": True},
        ]
        for kwargs in bad:
            with self.subTest(**kwargs):
                with self.assertRaises(ValidationError):
                    SolverConfig(**kwargs)


class TestInitialization(unittest.TestCase):
    def setUp(self):
        self.spec = GridSpec(32, 0.25)
        self.rng = np.random.default_rng(3)

    def series_of(self, images, translations=None):
        count = len(images)
        fields = tuple(RealField(self.spec, image) for image in images)
        return FocusSeries(fields, tuple(float(j) for j in range(count)),
                           translations or ((0.0, 0.0),) * count, SMALL_OPTICS, self.spec)

    def test_init_wave_is_root_mean_intensity(self):
        series = self.series_of([np.full((32, 32), 0.64), np.full((32, 32), 0.64)])
        psi = init_wave(series)
        self.assertIs(psi.space, Space.FOURIER)
        self.assertAlmostEqual(psi.values[16, 16].real, 0.8 * 0.25 ** 2, places=14)
        self.assertEqual(int(np.count_nonzero(psi.values)), 1)

    def test_integer_shifts_are_recovered_exactly(self):
        h = self.spec.pixel_size
        pattern = self.rng.uniform(0.5, 1.5, (32, 32))
        steps = ((0, 0), (2, -1), (5, 3))
        images = [np.roll(pattern, step, axis=(0, 1)) for step in steps]
        estimate = init_translations(self.series_of(images))
        self.assertEqual(estimate[0], (0.0, 0.0))
        for (a, b), (r, c) in zip(estimate, steps):
            self.assertAlmostEqual(a, r * h, places=9)
            self.assertAlmostEqual(b, c * h, places=9)

    def test_flat_images_assume_no_shift(self):
        series = self.series_of([np.ones((32, 32)), np.ones((32, 32))])
        with self.assertLogs("exit_wave.optimizer", "WARNING"):
            self.assertEqual(init_translations(series), ((0.0, 0.0), (0.0, 0.0)))

    def test_initial_variables(self):
        pattern = self.rng.uniform(0.5, 1.5, (32, 32))
        series = self.series_of([pattern, np.roll(pattern, 1, axis=0)])
        start = initial_variables(series, subpixel=False)
        self.assertEqual(len(start.translations_nm), 2)
        self.assertAlmostEqual(start.translations_nm[1][0], self.spec.pixel_size, places=12)


class TestErrors(unittest.TestCase):
    def setUp(self):
        self.spec = GridSpec(32, 0.25)
        self.ref = make_synthetic_wave(self.spec, two_atom_wave(self.spec), SMALL_OPTICS)

    def test_gauge_align_removes_phase_and_modulation(self):
        for c, s in ((0.7, (0.013, -0.021)), (-2.1, (-0.04, 0.0)), (0.0, (0.0, 0.0))):
            moved = modulate(self.ref, s)
            est = moved.with_values(moved.values * np.exp(1j * c))
            aligned = gauge_align(est, self.ref)
            with self.subTest(c=c, s=s):
                diff = aligned.with_values(aligned.values - self.ref.values)
                self.assertLessEqual(l2_norm(diff), 1e-6 * l2_norm(self.ref))

    def test_gauge_align_zero_reference(self):
        zero = ComplexField.zeros(self.spec, Space.FOURIER)
        self.assertIs(gauge_align(self.ref, zero), self.ref)

    def test_gauge_align_rejects_mismatches(self):
        with self.assertRaises(ValidationError):
            gauge_align(self.ref, ComplexField.zeros(GridSpec(32, 0.5), Space.FOURIER))
        with self.assertRaises(ValidationError):
            gauge_align(ComplexField.zeros(self.spec, Space.REAL), self.ref)

    def test_wave_errors_ignore_the_gauge(self):
        moved = modulate(self.ref, (0.02, 0.011))
        sup, euc = wave_errors(moved.with_values(moved.values * np.exp(0.3j)), self.ref)
        self.assertLess(sup, 1e-5)
        self.assertLess(euc, 1e-6)
        scaled = self.ref.with_values(self.ref.values * 1.1)
        self.assertAlmostEqual(wave_errors(scaled, self.ref)[1], 0.1, places=8)

    def test_translation_errors_in_pixels(self):
        h = self.spec.pixel_size
        sup, euc = translation_errors(np.array([[0.0, 0.0], [3 * h, 4 * h]]), ((0.0, 0.0), (0.0, 0.0)), h)
        self.assertAlmostEqual(sup, 5.0, places=12)
        self.assertAlmostEqual(euc, 5.0, places=12)
        sup, euc = translation_errors(np.array([[3 * h, 4 * h], [3 * h, 4 * h]]), ((0.0, 0.0), (0.0, 0.0)), h)
        self.assertAlmostEqual(sup, 5.0, places=12)
        self.assertAlmostEqual(euc, np.sqrt(50.0), places=12)


class TestIterationLog(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "log.csv"

    def tearDown(self):
        self.tmp.cleanup()

    def test_header_only(self):
        write_log([], self.path)
        self.assertEqual(self.path.read_text(encoding="utf-8"), ",".join(LOG_COLUMNS) + "\n")

    def test_unwritable_destination(self):
        with self.assertRaises(StorageError):
            write_log([], Path(self.tmp.name) / "missing" / "log.csv")


class BaseMinimizerTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.series, cls.kernels, cls.truth = small_problem()
        cls.start = initial_variables(cls.series)

    def run_solver(self, **settings):
        cfg = SolverConfig(**{"max_iters": 15, **settings})
        objective = Objective(self.series, self.kernels, RegularizerSpec(cfg.alpha))
        solver = Minimizer(objective, cfg, GroundTruth(self.truth, DRIFTS))
        final, records = solver.run(self.start)
        return solver, final, records

    def assertNonIncreasing(self, records):
        energies = [record.energy.total for record in records]
        for before, after in zip(energies, energies[1:]):
            self.assertLessEqual(after, before)


class TestMinimizer(BaseMinimizerTest):
    def test_energy_decreases(self):
        solver, final, records = self.run_solver()
        self.assertIsInstance(solver.stop_reason, StopReason)
        self.assertEqual(records[0].iteration, 0)
        self.assertEqual(records[0].step, 0.0)
        self.assertLessEqual(len(records), 16)
        self.assertNonIncreasing(records)
        self.assertLess(records[-1].energy.total, records[0].energy.total)
        self.assertEqual(final.translations_nm[0], (0.0, 0.0))

    def test_error_columns_with_truth(self):
        _, _, records = self.run_solver(max_iters=2)
        for record in records:
            self.assertIsNotNone(record.trans_err_sup_px)
            self.assertIsNotNone(record.wave_err_euc)
            self.assertEqual(len(record.row()), len(LOG_COLUMNS))

    def test_no_iterations(self):
        solver, final, records = self.run_solver(max_iters=0)
        self.assertEqual(len(records), 1)
        self.assertIs(solver.stop_reason, StopReason.MAX_ITERATIONS)
        np.testing.assert_array_equal(final.psi.values, self.start.psi.values)

    def test_frozen_translations(self):
        _, final, records = self.run_solver(freeze_translations=True)
        self.assertEqual(final.translations_nm, self.start.translations_nm)
        self.assertNonIncreasing(records)

    def test_exact_line_search(self):
        _, final, records = self.run_solver(freeze_translations=True, exact_line_search=True)
        self.assertNonIncreasing(records)
        self.assertLess(records[-1].energy.total, records[0].energy.total)

    def test_frozen_wave(self):
        _, final, records = self.run_solver(freeze_wave=True, max_iters=5)
        np.testing.assert_array_equal(final.psi.values, self.start.psi.values)
        self.assertNonIncreasing(records)

    def test_zero_alpha_warns(self):
        with self.assertLogs("exit_wave.optimizer", "WARNING") as logs:
            self.run_solver(alpha=0.0, max_iters=1)
        self.assertTrue(any("coercive" in line for line in logs.output))

    def test_first_translation_is_pinned(self):
        start = ReconstructionVariables(self.start.psi, ((0.01, -0.02),) + self.start.translations_nm[1:])
        final, _ = minimize(start, self.series, self.kernels, SolverConfig(max_iters=3))
        self.assertEqual(final.translations_nm[0], (0.0, 0.0))

    def test_translations_are_clamped_to_the_ball(self):
        with self.assertLogs("exit_wave.optimizer", "WARNING"):
            _, final, _ = self.run_solver(translation_bound_nm=0.001, max_iters=3)
        for t in final.translations_nm:
            self.assertLessEqual(np.hypot(*t), 0.001 * (1 + 1e-12))

    def test_truth_is_a_fixed_point(self):
        cfg = SolverConfig(alpha=0.0, max_iters=5)
        objective = Objective(self.series, self.kernels, RegularizerSpec(0.0))
        solver = Minimizer(objective, cfg)
        solver.run(ReconstructionVariables(self.truth, DRIFTS))
        self.assertIn(solver.stop_reason, (StopReason.CONVERGED, StopReason.STALLED))

    def test_start_must_match(self):
        with self.assertRaises(ValidationError):
            minimize(ReconstructionVariables(self.start.psi, DRIFTS[:2]), self.series, self.kernels, SolverConfig())

    def test_translation_scale(self):
        objective = Objective(self.series, self.kernels)
        scale = auto_translation_scale(objective, self.series)
        self.assertTrue(np.isfinite(scale))
        self.assertGreater(scale, 0.0)
        self.assertEqual(Minimizer(objective, SolverConfig(translation_scale_nm=0.5)).scale, 0.5)
        self.assertEqual(Minimizer(objective, SolverConfig()).bound, 0.125)

    def test_log_file(self):
        _, _, records = self.run_solver(max_iters=2)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "log.csv"
            write_log(records, path)
            with open(path, newline="", encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))
        self.assertEqual(len(rows), len(records))
        self.assertEqual(float(rows[0]["total_energy"]), records[0].energy.total)


if __name__ == '__main__':
    unittest.main()
