"""Ring arithmetic over Z_{2^l} and fixed-point encoding.

Ring elements are stored as ``numpy.uint64``. For ring widths below 64 the
values are kept reduced (high bits zero); because ``uint64`` arithmetic wraps
modulo 2^64, reducing by a final mask gives the correct result modulo 2^l.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RangeError

DEFAULT_RING_BITS = 64
DEFAULT_FRAC_BITS = 18

_SUPPORTED_BITS = (8, 16, 32, 64)


class Ring:
    """Z_{2^bits} with wrapping arithmetic on uint64 arrays."""

    def __init__(self, bits: int = DEFAULT_RING_BITS):
        if bits not in _SUPPORTED_BITS:
            raise ValueError(f"ring width must be one of {_SUPPORTED_BITS}, got {bits}")
        self.bits = bits
        self.mask = np.uint64((1 << bits) - 1)
        self.nbytes = bits // 8
        self.wire_dtype = np.dtype(f"<u{self.nbytes}")

    def __repr__(self) -> str:
        return f"Ring({self.bits})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Ring) and other.bits == self.bits

    def __hash__(self) -> int:
        return hash(self.bits)

    def reduce(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint64)
        if self.bits == 64:
            return x
        return x & self.mask

    def element(self, value) -> np.ndarray:
        """Map Python ints (any sign, any size) into the ring."""
        if isinstance(value, np.ndarray) and value.dtype == np.uint64:
            return self.reduce(value)
        if isinstance(value, np.ndarray) and value.dtype.kind == "i":
            return self.reduce(value.astype(np.int64).view(np.uint64))
        arr = np.asarray(value, dtype=object)
        mod = 1 << self.bits
        flat = [int(v) % mod for v in arr.reshape(-1)]
        return np.array(flat, dtype=np.uint64).reshape(arr.shape)

    def add(self, a, b) -> np.ndarray:
        return self.reduce(np.add(a, b, dtype=np.uint64))

    def sub(self, a, b) -> np.ndarray:
        return self.reduce(np.subtract(a, b, dtype=np.uint64))

    def mul(self, a, b) -> np.ndarray:
        return self.reduce(np.multiply(a, b, dtype=np.uint64))

    def neg(self, a) -> np.ndarray:
        return self.reduce(np.negative(np.asarray(a, dtype=np.uint64)))

    def matmul(self, a, b) -> np.ndarray:
        return self.reduce(np.matmul(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64)))

    def signed(self, a) -> np.ndarray:
        """Two's-complement interpretation as int64."""
        a = np.asarray(a, dtype=np.uint64)
        if self.bits == 64:
            return a.view(np.int64)
        shift = np.uint64(64 - self.bits)
        return (a << shift).view(np.int64) >> np.int64(64 - self.bits)

    def from_signed(self, a) -> np.ndarray:
        return self.reduce(np.asarray(a, dtype=np.int64).view(np.uint64))

    def shift_right_arith(self, a, bits: int) -> np.ndarray:
        return self.from_signed(self.signed(a) >> np.int64(bits))

    def msb(self, a) -> np.ndarray:
        return (np.asarray(a, dtype=np.uint64) >> np.uint64(self.bits - 1)) & np.uint64(1)

    def random(self, rng: np.random.Generator, shape) -> np.ndarray:
        return self.reduce(rng.integers(0, 1 << 64, size=shape, dtype=np.uint64, endpoint=False))


_RING64 = Ring(64)


def ring_add(a, b, ring: Ring = _RING64):
    return ring.add(a, b)


def ring_sub(a, b, ring: Ring = _RING64):
    return ring.sub(a, b)


def ring_mul(a, b, ring: Ring = _RING64):
    return ring.mul(a, b)


@dataclass(frozen=True)
class FixedPointValue:
    raw: np.ndarray
    frac_bits: int = DEFAULT_FRAC_BITS


def _round_half_toward_zero(x: np.ndarray) -> np.ndarray:
    mag = np.abs(x)
    # float64 has no fractional part above 2^52, and x - 0.5 would round there
    rounded = np.where(mag >= 2.0**52, mag, np.ceil(mag - 0.5))
    return np.copysign(rounded, x)


def encode_array(values, frac_bits: int = DEFAULT_FRAC_BITS, ring: Ring = _RING64) -> np.ndarray:
    """Encode reals as ring elements: round(r * 2^f), ties toward zero."""
    x = np.asarray(values, dtype=np.float64)
    limit = 2.0 ** (ring.bits - 1 - frac_bits)
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) >= limit):
        raise RangeError(f"value outside fixed-point range +-2^{ring.bits - 1 - frac_bits}")
    scaled = _round_half_toward_zero(np.ldexp(x, frac_bits))
    return ring.from_signed(scaled.astype(np.int64))


def decode_array(raw, frac_bits: int = DEFAULT_FRAC_BITS, ring: Ring = _RING64) -> np.ndarray:
    return np.ldexp(ring.signed(raw).astype(np.float64), -frac_bits)


def encode_fixed(r: float, frac_bits: int = DEFAULT_FRAC_BITS, ring: Ring = _RING64) -> FixedPointValue:
    return FixedPointValue(raw=encode_array(r, frac_bits, ring), frac_bits=frac_bits)


def decode_fixed(x: FixedPointValue, ring: Ring = _RING64) -> float:
    out = decode_array(x.raw, x.frac_bits, ring)
    return float(out) if out.ndim == 0 else out
