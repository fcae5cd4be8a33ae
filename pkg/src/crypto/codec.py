"""
IEEE-754 big-endian encoding of telemetry values.
"""
from typing import Sequence

import numpy as np

from ..core.exceptions import EncodingError

_DTYPES = {32: np.dtype(">f4"), 64: np.dtype(">f8")}


def _dtype(precision_bits: int) -> np.dtype:
    try:
        return _DTYPES[precision_bits]
    except KeyError:
        raise EncodingError(f"precision must be 32 or 64 bits, got {precision_bits}")


def encode_signals(values: Sequence[float], precision_bits: int = 32, allow_non_finite: bool = False) -> bytes:
    """Concatenate ``values`` as big-endian floats; ``len(values) * p / 8`` bytes."""
    dtype = _dtype(precision_bits)
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1:
        raise EncodingError("values must be a flat sequence")
    if not allow_non_finite and not np.all(np.isfinite(array)):
        raise EncodingError("non-finite telemetry value")
    with np.errstate(over="ignore"):
        encoded = array.astype(dtype)
    if not allow_non_finite and not np.all(np.isfinite(encoded)):
        raise EncodingError(f"value out of range for {precision_bits}-bit floats")
    return encoded.tobytes()


def decode_signals(data: bytes, precision_bits: int = 32) -> np.ndarray:
    dtype = _dtype(precision_bits)
    if len(data) % dtype.itemsize:
        raise EncodingError(f"{len(data)} bytes is not a whole number of {precision_bits}-bit values")
    return np.frombuffer(data, dtype=dtype).astype(np.float64)
