"""Typed key/value metadata used by field sidecars, manifests and golden files.

Each line reads ``key = type:value``. The type name selects the decoder from
``decoding_registry``; unknown type names decode to the raw string.
"""
import json
import math

from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Tuple

import numpy as np

from .errors import StorageError

EncodeFuncType = Callable[[Any], str]
DecodeFuncType = Callable[[str], Any]
EncodeType = Dict[str, EncodeFuncType]
DecodeType = Dict[str, DecodeFuncType]

Metadata = Dict[str, Any]


def _encode_float(val: float) -> str:
    """
    Serialize a float with the shortest text that round-trips exactly.

    Args:
        val (float): Value to encode.

    Returns:
        str: repr of the float.
    """
    return repr(float(val))


def _decode_bool(val: str) -> bool:
    if val not in ("True", "False"):
        raise ValueError(f"not a boolean: {val!r}")
    return val == "True"


def _decode_tuple(val: str) -> Tuple[Any, ...]:
    """
    Deserialize a JSON array into a tuple, turning nested arrays into tuples too.

    Args:
        val (str): A JSON-formatted array.

    Returns:
        Tuple[Any, ...]: The decoded values.
    """
    def _as_tuple(item: Any) -> Any:
        if isinstance(item, list):
            return tuple(_as_tuple(x) for x in item)
        return item
    return tuple(_as_tuple(x) for x in json.loads(val))


class MetadataJSONEncoder(json.JSONEncoder):
    """
    JSON encoder that understands numpy scalars and arrays.

    Manifests carry foci, translations and quadrature weights, which often arrive as
    numpy values; they are written as plain JSON numbers and arrays.
    """

    def default(self, o: Any) -> Any:
        """Overwrite default from json encoder.

        Args:
            o (Any): Object to be serialized.

        Raises:
            TypeError: If the object `o` cannot be serialized.

        Returns:
            Any: Serialized value.
        """
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.integer):
            return int(o)
        try:
            return json.JSONEncoder.default(self, o)
        except TypeError as e:
            raise TypeError(f"Object of type {type(o).__name__} is not metadata serializable") from e


def encode_json(obj: Any) -> str:
    """
    Encode a sequence to JSON using the metadata encoder.

    Args:
        obj (Any): Value to encode.

    Returns:
        str: JSON text without newlines.
    """
    return json.dumps(obj, cls=MetadataJSONEncoder, allow_nan=False)


decoding_registry: DecodeType = {
    "str": str,
    "int": int,
    "float": float,
    "bool": _decode_bool,
    "NoneType": lambda x: None,
    "list": json.loads,
    "tuple": _decode_tuple,
    "complex": lambda x: complex(*map(float, x.split(','))),
}


encoding_registry: EncodeType = {
    "float": _encode_float,
    "list": encode_json,
    "tuple": lambda x: encode_json(list(x)),
    "complex": lambda x: f"{_encode_float(x.real)},{_encode_float(x.imag)}",
    "NoneType": lambda x: "",
}


def _type_name(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "bool"
    if isinstance(value, np.integer):
        return "int"
    if isinstance(value, np.floating):
        return "float"
    if isinstance(value, np.ndarray):
        return "list"
    return type(value).__name__


def format_value(value: Any) -> str:
    """Format a value with its type name and encoded representation.

    Args:
        value (Any): The value to encode.

    Returns:
        str: ``type:encoded``.

    Raises:
        ValueError: For non-finite floats or types without a decoder.
    """
    store_type = _type_name(value)
    if store_type not in decoding_registry:
        raise ValueError(f"metadata cannot store values of type {store_type}")
    if store_type == "float" and not math.isfinite(float(value)):
        raise ValueError(f"metadata cannot store non-finite float {value!r}")
    if store_type == "bool":
        value = bool(value)
    elif store_type == "int":
        value = int(value)
    encoded = encoding_registry.get(store_type, str)(value)
    if "\n" in encoded:
        raise ValueError("encoded metadata values must fit on one line")
    return f"{store_type}:{encoded}"


def parse_value(text: str) -> Any:
    """Decode a ``type:encoded`` string.

    Args:
        text (str): Stored representation.

    Returns:
        Any: Decoded value; the raw text when the type name is unknown.
    """
    type_, _, value = text.partition(":")
    return decoding_registry.get(type_, lambda x: text)(value)


def dumps(mapping: Mapping[str, Any]) -> str:
    """Render metadata as text, one ``key = type:value`` line per entry.

    Args:
        mapping (Mapping[str, Any]): Keys and values, written in iteration order.

    Returns:
        str: Text ending with a newline.

    Raises:
        ValueError: For keys that are empty or contain separators.
    """
    lines = []
    for key, value in mapping.items():
        if not key or key != key.strip() or any(c in key for c in "=\n#"):
            raise ValueError(f"invalid metadata key {key!r}")
        lines.append(f"{key} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Metadata:
    """Parse metadata text produced by :func:`dumps`.

    Blank lines and lines starting with ``#`` are skipped.

    Args:
        text (str): Metadata text.

    Returns:
        Metadata: Decoded key/value pairs in file order.

    Raises:
        ValueError: On malformed lines or undecodable values.
    """
    result: Metadata = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {number}: expected 'key = type:value', got {raw!r}")
        result[key.strip()] = parse_value(value.strip())
    return result


def write_metadata(path: Path, mapping: Mapping[str, Any]) -> None:
    """Write a metadata file.

    Args:
        path (Path): Destination.
        mapping (Mapping[str, Any]): Entries.

    Raises:
        StorageError: If the file cannot be written or a value cannot be encoded.
    """
    try:
        path.write_text(dumps(mapping), encoding="utf-8")
    except (OSError, ValueError) as e:
        raise StorageError(f"cannot write metadata {path}: {e}") from e


def read_metadata(path: Path) -> Metadata:
    """Read a metadata file.

    Args:
        path (Path): Source.

    Returns:
        Metadata: Decoded entries.

    Raises:
        StorageError: If the file is missing, unreadable or malformed.
    """
    try:
        return loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise StorageError(f"cannot read metadata {path}: {e}") from e


def require(meta: Mapping[str, Any], key: str, kind: type, source: Any = "metadata") -> Any:
    """Fetch a key of an expected type.

    Args:
        meta (Mapping[str, Any]): Decoded metadata.
        key (str): Required key.
        kind (type): Expected Python type (int values are accepted for float).
        source (Any): Where the metadata came from, for diagnostics.

    Returns:
        Any: The value.

    Raises:
        StorageError: If the key is missing or has the wrong type.
    """
    if key not in meta:
        raise StorageError(f"{source}: missing key {key!r}")
    value = meta[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind):
        raise StorageError(f"{source}: key {key!r} should be {kind.__name__}, got {type(value).__name__}")
    return value
