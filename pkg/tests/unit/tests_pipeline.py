import csv
import dataclasses
import tempfile
import unittest

from pathlib import Path

import numpy as np

from exit_wave import StorageError
from exit_wave.config import apply_overrides, load_config, loads_config
from exit_wave.golden import (DEFAULT_TOLERANCES, check_golden, compare_golden, compare_tables, load_golden,
                              read_table, regen_golden)
from exit_wave.metadata import read_metadata
from exit_wave.optimizer import LOG_COLUMNS, StopReason
from exit_wave.pipeline import (EPOCH, LOG_NAME, config_digest, load_truth, reconstruct, save_truth, simulate,
                                timestamp)
from exit_wave.storage import FieldStore

SMALL = """
[optics]
alpha_max_rad = 0.05

[grid]
n = 32
extent_nm = 0.25

[series]
foci_nm = -10.0, -8.5, -7.0, -5.5
drift_step_nm = 0.0117, 0.0039

[wave]
preset = atoms
atoms = 0.03 -0.02 0.8 0.015 -0.1; -0.07 0.06 0.4 0.02 0.05

[solver]
max_iters = 5

[run]
deterministic = true
n_focal = 3
"""


class BasePipelineTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.config = loads_config(SMALL)

    def tearDown(self):
        self.tmp.cleanup()


class TestSimulate(BasePipelineTest):
    def test_run_directory(self):
        result = simulate(self.config, self.root / "run")
        self.assertEqual(len(result.series), 4)
        self.assertTrue((self.root / "run" / "config.ini").is_file())
        self.assertEqual(load_config(self.root / "run" / "config.ini"), self.config)
        series_store = FieldStore(self.root / "run" / "series")
        self.assertEqual(list(series_store), ["image_000", "image_001", "image_002", "image_003"])
        manifest = series_store.read_manifest()
        self.assertEqual(manifest["created_utc"], EPOCH)
        self.assertEqual(manifest["config_sha256"], config_digest(self.config))
        truth = load_truth(self.root / "run" / "truth")
        self.assertEqual(truth.translations_nm, result.truth.translations_nm)
        np.testing.assert_array_equal(truth.psi.values, result.truth.psi.values)

    def test_timestamps(self):
        self.assertEqual(timestamp(self.config), EPOCH)
        live = dataclasses.replace(self.config, run=dataclasses.replace(self.config.run, deterministic=False))
        self.assertNotEqual(timestamp(live), EPOCH)
        self.assertTrue(timestamp(live).endswith("Z"))

    def test_digest_tracks_the_config(self):
        other = apply_overrides(self.config, ["run.seed=1"])
        self.assertNotEqual(config_digest(other), config_digest(self.config))
        self.assertEqual(config_digest(loads_config(SMALL)), config_digest(self.config))


class TestTruth(BasePipelineTest):
    def test_missing_truth(self):
        with self.assertRaises(StorageError):
            load_truth(self.root / "absent")

    def test_truth_must_be_a_fourier_wave(self):
        result = simulate(self.config, self.root / "run")
        store = FieldStore(self.root / "bad", create=True)
        store["wave"] = result.series.images[0]
        store.write_manifest({"translations_nm": ((0.0, 0.0),)})
        with self.assertRaises(StorageError):
            load_truth(self.root / "bad")

    def test_round_trip(self):
        result = simulate(self.config, self.root / "run")
        save_truth(result.truth, self.root / "copy", {"note": "copy"})
        self.assertEqual(load_truth(self.root / "copy").translations_nm, result.truth.translations_nm)


class TestReconstruct(BasePipelineTest):
    def setUp(self):
        super().setUp()
        simulate(self.config, self.root / "run")

    def test_outputs(self):
        result = reconstruct(self.config, self.root / "run" / "series", directory=self.root / "rec")
        self.assertIsInstance(result.stop_reason, StopReason)
        self.assertLessEqual(len(result.records), 6)
        store = FieldStore(self.root / "rec")
        self.assertIn("wave", store)
        manifest = store.read_manifest()
        self.assertEqual(manifest["stop_reason"], result.stop_reason.value)
        self.assertEqual(manifest["iterations"], result.records[-1].iteration)
        self.assertEqual(manifest["translations_nm"][0], (0.0, 0.0))
        rows = read_table(self.root / "rec" / LOG_NAME)
        self.assertEqual(len(rows), len(result.records))
        self.assertEqual(tuple(rows[0]), LOG_COLUMNS)
        self.assertNotEqual(rows[0]["trans_err_euc_px"], "")

    def test_without_truth(self):
        result = reconstruct(self.config, self.root / "run" / "series", truth_dir=self.root / "nowhere",
                             directory=self.root / "rec")
        self.assertIsNone(result.records[0].wave_err_euc)
        self.assertEqual(read_table(self.root / "rec" / LOG_NAME)[0]["wave_err_euc"], "")

    def test_repeated_runs_are_identical(self):
        reconstruct(self.config, self.root / "run" / "series", directory=self.root / "a")
        reconstruct(self.config, self.root / "run" / "series", directory=self.root / "b")
        self.assertEqual((self.root / "a" / LOG_NAME).read_bytes(), (self.root / "b" / LOG_NAME).read_bytes())
        self.assertEqual(read_metadata(self.root / "a" / "manifest.txt"),
                         read_metadata(self.root / "b" / "manifest.txt"))

    def test_grid_mismatch(self):
        other = apply_overrides(self.config, ["grid.extent_nm=0.2"])
        with self.assertRaises(StorageError):
            reconstruct(other, self.root / "run" / "series", directory=self.root / "rec")

    def test_missing_series(self):
        with self.assertRaises(StorageError):
            reconstruct(self.config, self.root / "absent", directory=self.root / "rec")


class TestGolden(BasePipelineTest):
    def test_regenerate_and_compare(self):
        golden = regen_golden(self.config, self.root / "golden")
        self.assertEqual(golden.config, self.config)
        self.assertEqual(golden.tolerances, DEFAULT_TOLERANCES)
        self.assertGreater(len(golden.log), 0)
        self.assertEqual(len(golden.convexity), 4)
        reloaded = load_golden(self.root / "golden")
        self.assertEqual(reloaded.log, golden.log)
        self.assertEqual(compare_golden(self.root / "golden" / LOG_NAME, golden,
                                        self.root / "golden" / "convexity.csv"), [])

    def test_perturbed_log_is_reported(self):
        golden = regen_golden(self.config, self.root / "golden")
        rows = [dict(row) for row in golden.log]
        rows[-1]["total_energy"] = repr(float(rows[-1]["total_energy"]) * 1.01)
        path = self.root / "perturbed.csv"
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=LOG_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        with self.assertLogs("exit_wave.golden", "WARNING"):
            mismatches = compare_golden(path, golden)
        self.assertEqual(len(mismatches), 1)
        self.assertEqual(mismatches[0].column, "total_energy")
        self.assertEqual(mismatches[0].row, len(rows) - 1)

    def test_fresh_run_matches_a_pinned_golden(self):
        regen_golden(self.config, self.root / "golden")
        self.assertEqual(check_golden(self.root / "golden"), [])
        with open(self.root / "golden" / LOG_NAME, encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        rows[0]["data_term"] = repr(2.0 * float(rows[0]["data_term"]))
        with open(self.root / "golden" / LOG_NAME, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=LOG_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        with self.assertLogs("exit_wave.golden", "WARNING"):
            mismatches = check_golden(self.root / "golden")
        self.assertEqual([(m.row, m.column) for m in mismatches], [(0, "data_term")])

    def test_compare_tables(self):
        expected = [{"iteration": "0", "step": "1.0", "wave_err_euc": ""}]
        tolerances = {"iteration": 0.0, "step": 1e-6}
        self.assertEqual(compare_tables(expected, [{"iteration": "0", "step": "1.0000001", "wave_err_euc": ""}],
                                        tolerances), [])
        self.assertEqual(len(compare_tables(expected, [{"iteration": "0", "step": "1.1", "wave_err_euc": ""}],
                                            tolerances)), 1)
        self.assertEqual(len(compare_tables(expected, [{"iteration": "0", "step": "1.0", "wave_err_euc": "0.1"}],
                                            tolerances)), 1)
        self.assertEqual(compare_tables(expected, [], tolerances)[0].column, "rows")

    def test_missing_golden(self):
        with self.assertRaises(StorageError):
            load_golden(self.root / "absent")


if __name__ == '__main__':
    unittest.main()
