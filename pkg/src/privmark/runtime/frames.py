"""Wire framing.

Layout (little-endian): session id u64 | phase tag u16 | sequence u64 |
payload length u32 | payload. The payload is a packed array of ring
elements, each l/8 bytes wide.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import DesyncError, FormatError
from ..numeric import Ring

HEADER = struct.Struct("<QHQI")
HEADER_SIZE = HEADER.size  # 22

PHASE_TAGS = {
    "Setup": 0,
    "Embed": 1,
    "Cosine": 2,
    "Topk": 3,
    "Insert": 4,
    "Detect": 5,
    "SecTable": 6,
    "Default": 7,
    "Model": 8,
}


def phase_tag(name: str) -> int:
    if name in PHASE_TAGS:
        return PHASE_TAGS[name]
    # stable for ad-hoc labels (tests, benches); collisions only affect the header
    return 0x100 + (sum(name.encode()) & 0xFEFF)


@dataclass(frozen=True)
class Frame:
    session_id: int
    phase: int
    seq: int
    payload: bytes

    def encode(self) -> bytes:
        return HEADER.pack(self.session_id, self.phase, self.seq, len(self.payload)) + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "Frame":
        if len(data) < HEADER_SIZE:
            raise FormatError("truncated frame header")
        sid, tag, seq, length = HEADER.unpack_from(data)
        payload = data[HEADER_SIZE:]
        if len(payload) != length:
            raise FormatError(f"frame payload length {len(payload)} != header {length}")
        return cls(sid, tag, seq, payload)


def pack_elements(values: np.ndarray, ring: Ring) -> bytes:
    return np.ascontiguousarray(values, dtype=np.uint64).astype(ring.wire_dtype).tobytes()


def unpack_elements(payload: bytes, ring: Ring, shape=None) -> np.ndarray:
    if len(payload) % ring.nbytes:
        raise FormatError(f"payload length {len(payload)} is not a multiple of {ring.nbytes}")
    arr = np.frombuffer(payload, dtype=ring.wire_dtype).astype(np.uint64)
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


class SequenceChecker:
    """Tracks the next expected sequence number on one inbound channel."""

    def __init__(self, session_id: int):
        self.session_id = session_id
        self.expected = 0

    def check(self, frame: Frame) -> None:
        if frame.session_id != self.session_id:
            raise DesyncError(f"frame from session {frame.session_id:#x}, expected {self.session_id:#x}")
        if frame.seq != self.expected:
            raise DesyncError(f"frame sequence gap: got {frame.seq}, expected {self.expected}")
        self.expected += 1
