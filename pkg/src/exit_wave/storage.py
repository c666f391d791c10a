"""Field files and a dict-like store over a directory of them.

A field ``stem`` is two files: ``stem.meta`` (typed metadata, see
:mod:`exit_wave.metadata`) and ``stem.bin`` (raw little-endian samples in
centered storage order, ``<c16`` for complex and ``<f8`` for real fields).
"""
import logging

from collections.abc import MutableMapping
from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import StorageError
from .fields import ComplexField, GridSpec, RealField, Space
from .metadata import Metadata, read_metadata, require, write_metadata

logger = logging.getLogger(__name__)

AnyField = Union[ComplexField, RealField]

META_SUFFIX = ".meta"
DATA_SUFFIX = ".bin"
MANIFEST_NAME = "manifest.txt"

_DTYPES = {"complex": "<c16", "real": "<f8"}


def _paths(stem: Path) -> Tuple[Path, Path]:
    return stem.with_name(stem.name + META_SUFFIX), stem.with_name(stem.name + DATA_SUFFIX)


def write_field(stem: Path, field: AnyField, extra: Optional[Mapping[str, Any]] = None) -> None:
    """Write a field as ``stem.meta`` + ``stem.bin``.

    Args:
        stem (Path): Path without suffix.
        field (AnyField): Complex or real field.
        extra (Optional[Mapping[str, Any]]): Additional metadata entries (e.g. focus, translation).

    Raises:
        StorageError: If the files cannot be written or extra keys clash with reserved ones.
    """
    kind = "complex" if isinstance(field, ComplexField) else "real"
    meta: Metadata = {
        "kind": kind,
        "dtype": _DTYPES[kind],
        "n": field.spec.n,
        "extent_nm": field.spec.extent_nm,
        "space": field.space.value,
    }
    for key, value in (extra or {}).items():
        if key in meta:
            raise StorageError(f"metadata key {key!r} is reserved")
        meta[key] = value
    meta_path, data_path = _paths(stem)
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        np.ascontiguousarray(field.values, dtype=_DTYPES[kind]).tofile(data_path)
    except OSError as e:
        raise StorageError(f"cannot write field data {data_path}: {e}") from e
    write_metadata(meta_path, meta)


def read_field(stem: Path) -> Tuple[AnyField, Metadata]:
    """Read a field written by :func:`write_field`.

    Args:
        stem (Path): Path without suffix.

    Returns:
        Tuple[AnyField, Metadata]: The field and the full sidecar metadata.

    Raises:
        StorageError: On missing files, malformed sidecars or a payload of the wrong size.
    """
    meta_path, data_path = _paths(stem)
    meta = read_metadata(meta_path)
    kind = require(meta, "kind", str, meta_path)
    if kind not in _DTYPES:
        raise StorageError(f"{meta_path}: unknown field kind {kind!r}")
    dtype = require(meta, "dtype", str, meta_path)
    if dtype != _DTYPES[kind]:
        raise StorageError(f"{meta_path}: dtype {dtype!r} does not match kind {kind!r}")
    n = require(meta, "n", int, meta_path)
    extent = require(meta, "extent_nm", float, meta_path)
    space = require(meta, "space", str, meta_path)
    try:
        spec = GridSpec(n, extent)
        space_ = Space(space)
    except ValueError as e:
        raise StorageError(f"{meta_path}: {e}") from e
    try:
        payload = np.fromfile(data_path, dtype=dtype)
    except OSError as e:
        raise StorageError(f"cannot read field data {data_path}: {e}") from e
    if payload.size != n * n:
        raise StorageError(f"{data_path}: holds {payload.size} samples, sidecar declares {n}x{n}")
    values = payload.reshape(n, n)
    try:
        field: AnyField = (ComplexField(spec, values, space_) if kind == "complex"
                           else RealField(spec, values, space_))
    except ValueError as e:
        raise StorageError(f"{data_path}: {e}") from e
    return field, meta


class FieldStore(MutableMapping):  # type: ignore[type-arg]
    """Dictionary of fields backed by a directory.

    ``store[key] = field`` writes ``key.meta`` and ``key.bin``; reading decodes the
    sidecar and payload back into a field. Keys are plain file stems.

    Attributes:
        directory (Path): Backing directory, created on first write.
        extra (Dict[str, Dict[str, Any]]): Metadata to attach per key on the next write.
    """

    def __init__(self, directory: Union[str, Path], create: bool = False) -> None:
        """
        Open a store.

        Args:
            directory (Union[str, Path]): Backing directory.
            create (bool): Create the directory now if it does not exist.

        Raises:
            StorageError: If the path exists but is not a directory or cannot be created.
        """
        self.directory = Path(directory)
        self.extra: Dict[str, Dict[str, Any]] = {}
        if self.directory.exists() and not self.directory.is_dir():
            raise StorageError(f"{self.directory} is not a directory")
        if create:
            try:
                self.directory.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise StorageError(f"cannot create {self.directory}: {e}") from e

    def _format_key(self, key: str) -> Path:
        """
        Map a key to its file stem inside the directory.

        Args:
            key (str): Store key.

        Returns:
            Path: Stem path.

        Raises:
            KeyError: For keys that are not plain file names.
        """
        if not isinstance(key, str) or not key or key in (".", "..") or any(c in key for c in "/\\\0"):
            raise KeyError(key)
        return self.directory / key

    def _parse_key(self, path: Path) -> str:
        return path.name[:-len(META_SUFFIX)]

    def __getitem__(self, key: str) -> AnyField:
        """
        Load the field stored under key.

        Args:
            key (str): Store key.

        Returns:
            AnyField: The field.

        Raises:
            KeyError: If no sidecar exists for key.
        """
        stem = self._format_key(key)
        if not _paths(stem)[0].is_file():
            raise KeyError(key)
        return read_field(stem)[0]

    def metadata(self, key: str) -> Metadata:
        """
        Sidecar metadata of a stored field.

        Args:
            key (str): Store key.

        Returns:
            Metadata: Decoded sidecar.

        Raises:
            KeyError: If no sidecar exists for key.
        """
        meta_path = _paths(self._format_key(key))[0]
        if not meta_path.is_file():
            raise KeyError(key)
        return read_metadata(meta_path)

    def __setitem__(self, key: str, value: AnyField) -> None:
        """
        Write a field under key, replacing any previous one.

        Args:
            key (str): Store key.
            value (AnyField): Field to store.

        Raises:
            TypeError: If value is not a field.
        """
        if not isinstance(value, (ComplexField, RealField)):
            raise TypeError(f"FieldStore holds fields, got {type(value).__name__}")
        write_field(self._format_key(key), value, self.extra.pop(key, None))

    def __delitem__(self, key: str) -> None:
        """
        Remove both files of key.

        Args:
            key (str): Store key.

        Raises:
            KeyError: If the key does not exist.
        """
        meta_path, data_path = _paths(self._format_key(key))
        if not meta_path.is_file():
            raise KeyError(key)
        try:
            meta_path.unlink()
            data_path.unlink(missing_ok=True)
        except OSError as e:
            raise StorageError(f"cannot delete {key!r} from {self.directory}: {e}") from e

    def __iter__(self) -> Iterator[str]:
        """
        Iterate over keys in sorted order.

        Returns:
            Iterator[str]: Keys with a sidecar in the directory.
        """
        if not self.directory.is_dir():
            return iter(())
        return iter(sorted(self._parse_key(p) for p in self.directory.glob("*" + META_SUFFIX)))

    def __len__(self) -> int:
        """
        Count stored fields.

        Returns:
            int: Number of sidecars in the directory.
        """
        return sum(1 for _ in self)

    def __repr__(self) -> str:
        """
        Short representation naming the directory.

        Returns:
            str: Representation.
        """
        return f"FieldStore({str(self.directory)!r})"

    def manifest_path(self) -> Path:
        """Path of the manifest file, which is never listed as a field.

        Returns:
            Path: ``directory/manifest.txt``.
        """
        return self.directory / MANIFEST_NAME

    def write_manifest(self, mapping: Mapping[str, Any]) -> None:
        """Write the store's manifest.

        Args:
            mapping (Mapping[str, Any]): Manifest entries.
        """
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageError(f"cannot create {self.directory}: {e}") from e
        write_metadata(self.manifest_path(), mapping)
        logger.debug("wrote manifest %s", self.manifest_path())

    def read_manifest(self) -> Metadata:
        """Read the store's manifest.

        Returns:
            Metadata: Manifest entries.
        """
        return read_metadata(self.manifest_path())
