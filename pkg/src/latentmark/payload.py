"""Secret payloads: fixed-length bit vectors and their text/hex encodings."""

from __future__ import annotations

import numpy as np


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError(f"payload must be 1-D, got shape {arr.shape}")
    arr = arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("payload may only contain 0s and 1s")
    return arr


def random_secret(length: int, seed: int) -> np.ndarray:
    """Uniform random bit vector, deterministic in (length, seed)."""
    if length <= 0:
        raise ValueError(f"secret length must be >= 1, got {length}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.integers(0, 2, size=length, dtype=np.uint8)


def string_to_bits(text: str | bytes, length: int) -> np.ndarray:
    """Big-endian bit expansion of `text`, zero-padded on the right to `length` bits."""
    data = text.encode() if isinstance(text, str) else bytes(text)
    if 8 * len(data) > length:
        raise ValueError(
            f"{len(data)} bytes need {8 * len(data)} bits but only {length} available"
        )
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    return np.concatenate([bits, np.zeros(length - bits.size, dtype=np.uint8)])


def bits_to_string(bits) -> bytes:
    """Inverse of string_to_bits: pack whole bytes, drop trailing zero bytes."""
    arr = _as_bits(bits)
    nbytes = arr.size // 8
    data = np.packbits(arr[: nbytes * 8]).tobytes()
    return data.rstrip(b"\x00")


def bits_to_hex(bits) -> str:
    """Hex encoding of the payload, left-aligned and zero-padded to whole bytes."""
    arr = _as_bits(bits)
    padded = np.concatenate([arr, np.zeros((-arr.size) % 8, dtype=np.uint8)])
    return np.packbits(padded).tobytes().hex()


def hex_to_bits(text: str, length: int) -> np.ndarray:
    """Decode a hex string produced by bits_to_hex back to a `length`-bit payload."""
    data = bytes.fromhex(text)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if bits.size < length:
        raise ValueError(f"hex string holds {bits.size} bits, need {length}")
    extra = bits[length:]
    if np.any(extra):
        raise ValueError("hex string has nonzero bits beyond the payload length")
    return bits[:length].copy()


def parse_secret(text: str, length: int) -> np.ndarray:
    """Parse a CLI secret: `hex:` prefix for hexadecimal, raw ASCII otherwise."""
    if text.startswith("hex:"):
        return hex_to_bits(text[4:], length)
    return string_to_bits(text, length)
