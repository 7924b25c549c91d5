"""In-memory transports (plain and shaped).

A channel carries one direction of one party pair. Items are
``(frame_bytes, stamp)`` where ``stamp`` is the sender's logical round clock.
"""

from __future__ import annotations

import queue
import time

from ..errors import TransportError
from ..sharing import PartyId
from .frames import HEADER_SIZE
from .profiles import NetworkProfile

_ABORT = object()


class InMemoryChannel:
    def __init__(self, maxsize: int = 0):
        self._q: queue.Queue = queue.Queue(maxsize)
        self.closed = False

    def send(self, data: bytes, stamp: int) -> None:
        if self.closed:
            raise TransportError("channel closed")
        self._q.put((data, stamp))

    def recv(self, timeout: float | None = None) -> tuple[bytes, int]:
        try:
            item = self._q.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError(f"no message within {timeout}s") from None
        if item is _ABORT:
            self._q.put(_ABORT)
            raise TransportError("peer aborted the session")
        return item

    def abort(self) -> None:
        self.closed = True
        self._q.put(_ABORT)

    def close(self) -> None:
        self.closed = True


class ShapedChannel:
    """Delays each message by latency + payload_bits / bandwidth (real time).

    The link transmits one message at a time, so back-to-back messages queue
    behind each other and FIFO order is kept.
    """

    def __init__(self, inner: InMemoryChannel, profile: NetworkProfile, payload_size=None):
        self.inner = inner
        self.profile = profile
        self._free_at = 0.0
        self._payload_size = payload_size or (lambda data: len(data))

    def send(self, data: bytes, stamp: int) -> None:
        now = time.monotonic()
        start = max(now, self._free_at)
        self._free_at = start + self.profile.transmit_time(self._payload_size(data))
        self.inner.send((data, self._free_at + self.profile.latency), stamp)

    def recv(self, timeout: float | None = None) -> tuple[bytes, int]:
        (data, deliver_at), stamp = self.inner.recv(timeout)
        wait = deliver_at - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        return data, stamp

    def abort(self) -> None:
        self.inner.abort()

    def close(self) -> None:
        self.inner.close()


class InMemoryTransport:
    """Six directed channels connecting three in-process parties."""

    def __init__(self):
        self.channels = {
            (a, b): InMemoryChannel() for a in PartyId for b in PartyId if a != b
        }

    def endpoints(self, pid: PartyId) -> dict:
        """``{peer: (outbound, inbound)}`` for one party."""
        return {peer: (self.channels[(pid, peer)], self.channels[(peer, pid)]) for peer in (pid.next, pid.prev)}

    def abort(self) -> None:
        for ch in self.channels.values():
            ch.abort()


def shape(profile: NetworkProfile, transport: InMemoryTransport) -> InMemoryTransport:
    """Wrap every channel of an in-memory transport with real-time shaping."""
    if not isinstance(transport, InMemoryTransport):
        raise TypeError("only in-memory transports can be shaped; TCP shaping belongs to the OS")
    shaped = InMemoryTransport.__new__(InMemoryTransport)
    shaped.channels = {
        key: ShapedChannel(ch, profile, payload_size=lambda data: max(len(data) - HEADER_SIZE, 0))
        for key, ch in transport.channels.items()
    }
    return shaped
