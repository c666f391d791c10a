import tempfile
import unittest

from pathlib import Path

import numpy as np

from exit_wave import ComplexField, FieldStore, GridSpec, RealField, Space, StorageError
from exit_wave.metadata import write_metadata
from exit_wave.storage import MANIFEST_NAME, read_field, write_field


class BaseFieldStoreTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.store = FieldStore(self.root / "store", create=True)
        self.spec = GridSpec(8, 0.4)
        rng = np.random.default_rng(0)
        self.wave = ComplexField(self.spec, rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)),
                                 Space.FOURIER)
        self.image = RealField(self.spec, rng.uniform(0.5, 1.5, (8, 8)))

    def tearDown(self):
        self.tmp.cleanup()


class TestFieldStoreMapping(BaseFieldStoreTest):
    def test_set_get_complex(self):
        self.store["wave"] = self.wave
        loaded = self.store["wave"]
        self.assertIsInstance(loaded, ComplexField)
        self.assertEqual(loaded.spec, self.spec)
        self.assertIs(loaded.space, Space.FOURIER)
        np.testing.assert_array_equal(loaded.values, self.wave.values)

    def test_set_get_real(self):
        self.store["image_000"] = self.image
        loaded = self.store["image_000"]
        self.assertIsInstance(loaded, RealField)
        self.assertIs(loaded.space, Space.REAL)
        np.testing.assert_array_equal(loaded.values, self.image.values)

    def test_keys_are_sorted_and_manifest_is_hidden(self):
        for key in ("image_002", "image_000", "image_001"):
            self.store[key] = self.image
        self.store.write_manifest({"count": 3})
        self.assertEqual(list(self.store), ["image_000", "image_001", "image_002"])
        self.assertEqual(len(self.store), 3)
        self.assertIn("image_001", self.store)
        self.assertTrue((self.store.directory / MANIFEST_NAME).is_file())

    def test_overwrite(self):
        self.store["wave"] = self.wave
        self.store["wave"] = self.image
        self.assertIsInstance(self.store["wave"], RealField)
        self.assertEqual(len(self.store), 1)

    def test_delete(self):
        self.store["wave"] = self.wave
        del self.store["wave"]
        self.assertNotIn("wave", self.store)
        self.assertFalse((self.store.directory / "wave.bin").exists())
        with self.assertRaises(KeyError):
            del self.store["wave"]

    def test_missing_and_invalid_keys(self):
        for key in ("absent", "", "..", "a/b"):
            with self.assertRaises(KeyError):
                self.store[key]

    def test_only_fields_are_stored(self):
        with self.assertRaises(TypeError):
            self.store["wave"] = self.wave.values

    def test_missing_directory_is_empty(self):
        store = FieldStore(self.root / "nowhere")
        self.assertEqual(len(store), 0)
        self.assertEqual(list(store), [])

    def test_file_in_place_of_directory(self):
        path = self.root / "plain.txt"
        path.write_text("x", encoding="utf-8")
        with self.assertRaises(StorageError):
            FieldStore(path)


class TestFieldStoreMetadata(BaseFieldStoreTest):
    def test_extra_metadata_is_attached_once(self):
        self.store.extra["image_000"] = {"focus_nm": -10.0, "translation_nm": (0.0, 0.0)}
        self.store["image_000"] = self.image
        meta = self.store.metadata("image_000")
        self.assertEqual(meta["focus_nm"], -10.0)
        self.assertEqual(meta["translation_nm"], (0.0, 0.0))
        self.assertEqual(meta["kind"], "real")
        self.assertEqual(meta["dtype"], "<f8")
        self.assertNotIn("image_000", self.store.extra)

    def test_reserved_keys(self):
        self.store.extra["wave"] = {"n": 16}
        with self.assertRaises(StorageError):
            self.store["wave"] = self.wave

    def test_manifest_round_trip(self):
        manifest = {"count": 2, "foci_nm": (-10.0, -8.5), "created_utc": "1970-01-01T00:00:00Z"}
        self.store.write_manifest(manifest)
        self.assertEqual(self.store.read_manifest(), manifest)

    def test_metadata_of_missing_key(self):
        with self.assertRaises(KeyError):
            self.store.metadata("absent")


class TestCorruptFiles(BaseFieldStoreTest):
    def test_truncated_payload(self):
        stem = self.root / "wave"
        write_field(stem, self.wave)
        data = (self.root / "wave.bin").read_bytes()
        (self.root / "wave.bin").write_bytes(data[:-16])
        with self.assertRaises(StorageError):
            read_field(stem)

    def test_dtype_disagrees_with_kind(self):
        stem = self.root / "wave"
        write_field(stem, self.wave)
        write_metadata(self.root / "wave.meta", {"kind": "complex", "dtype": "<f8", "n": 8, "extent_nm": 0.4,
                                                 "space": "fourier"})
        with self.assertRaises(StorageError):
            read_field(stem)

    def test_unknown_space(self):
        stem = self.root / "wave"
        write_field(stem, self.wave)
        write_metadata(self.root / "wave.meta", {"kind": "complex", "dtype": "<c16", "n": 8, "extent_nm": 0.4,
                                                 "space": "momentum"})
        with self.assertRaises(StorageError):
            read_field(stem)

    def test_missing_sidecar_key(self):
        stem = self.root / "wave"
        write_field(stem, self.wave)
        write_metadata(self.root / "wave.meta", {"kind": "complex", "dtype": "<c16", "n": 8})
        with self.assertRaises(StorageError):
            read_field(stem)

    def test_non_finite_payload(self):
        stem = self.root / "image"
        write_field(stem, self.image)
        payload = np.full(64, np.nan)
        payload.tofile(self.root / "image.bin")
        with self.assertRaises(StorageError):
            read_field(stem)


if __name__ == '__main__':
    unittest.main()
