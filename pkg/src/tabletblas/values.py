"""Text encoding of cell values.

Values travel as UTF-8 decimal text. Text without a decimal point parses to
an integer; anything else parses to a 64-bit float. Integral numbers render
without an exponent, other floats with the shortest round-trip repr.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DataFormatError

_EXACT_FLOAT_INT = 2**53


def parse_value(raw, key=None) -> int | float:
    """Parse one value (bytes, str, or a number) into ``int`` or ``float``."""
    if isinstance(raw, (bool, np.bool_)):
        raise DataFormatError(_where(f"boolean value {raw!r}", key))
    if isinstance(raw, (int, np.integer)):
        return int(raw)
    if isinstance(raw, (float, np.floating)):
        if not math.isfinite(raw):
            raise DataFormatError(_where(f"non-finite value {raw!r}", key))
        return float(raw)
    if isinstance(raw, (bytes, bytearray, np.bytes_)):
        try:
            text = bytes(raw).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataFormatError(_where(f"value {raw!r} is not UTF-8", key)) from exc
    elif isinstance(raw, str):
        text = raw
    else:
        raise DataFormatError(_where(f"unsupported value type {type(raw).__name__}", key))
    if not text:
        raise DataFormatError(_where("empty value", key))
    if "." not in text:
        try:
            return int(text)
        except ValueError:
            pass
    try:
        out = float(text)
    except ValueError:
        raise DataFormatError(_where(f"unparsable value {text!r}", key)) from None
    if not math.isfinite(out):
        raise DataFormatError(_where(f"non-finite value {text!r}", key))
    return out


def format_value(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, (bool, np.bool_)):
        return str(int(value))
    value = float(value)
    if value.is_integer() and abs(value) < _EXACT_FLOAT_INT:
        return str(int(value))
    return repr(value)


def encode_value(value) -> bytes:
    return format_value(value).encode("ascii")


def value_array(values, keys=None) -> np.ndarray:
    """Parse a sequence of raw values into an int64 or float64 array."""
    parsed = []
    for i, raw in enumerate(values):
        parsed.append(parse_value(raw, None if keys is None else keys[i]))
    if all(isinstance(v, int) for v in parsed):
        try:
            return np.array(parsed, dtype=np.int64)
        except OverflowError as exc:
            raise DataFormatError("integer value outside the 64-bit range") from exc
    return np.array(parsed, dtype=np.float64)


def require_integral(values: np.ndarray, what: str) -> np.ndarray:
    """Return ``values`` as int64, or raise if any value is not an integer."""
    if values.dtype.kind in "iu":
        return values.astype(np.int64, copy=False)
    bad = values != np.floor(values)
    if bad.any():
        raise DataFormatError(f"{what} needs integer values, got {values[bad][0]!r}")
    return values.astype(np.int64)


def _where(message, key):
    return message if key is None else f"{message} at key {key!r}"
