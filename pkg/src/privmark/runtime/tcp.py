"""TCP transport: one long-lived connection per ordered party pair.

Every connection starts with a fixed handshake so that parties configured
with a different ring width, fraction-bit count or session id refuse to run.
On the wire each frame is prefixed by the sender's 8-byte logical round
clock (accounting only; it is not part of the frame).
"""

from __future__ import annotations

import socket
import struct
import threading
import time

from ..errors import HandshakeError, TransportError
from ..sharing import PartyId
from .frames import HEADER, HEADER_SIZE

HELLO = struct.Struct("<4sBBBQ")
MAGIC = b"PMK1"
ACK, REJECT = b"\x01", b"\x00"
STAMP = struct.Struct("<Q")


def parse_address(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bad address {addr!r}, expected host:port")
    return host, int(port)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except socket.timeout:
            raise TimeoutError("TCP receive timed out") from None
        except OSError as exc:
            raise TransportError(f"connection error: {exc}") from exc
        if not chunk:
            raise TransportError("connection closed by peer")
        buf += chunk
    return bytes(buf)


class TcpOutChannel:
    def __init__(self, sock: socket.socket):
        self.sock = sock

    def send(self, data: bytes, stamp: int) -> None:
        try:
            self.sock.sendall(STAMP.pack(stamp) + data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    abort = close


class TcpInChannel:
    def __init__(self, sock: socket.socket):
        self.sock = sock

    def recv(self, timeout: float | None = None) -> tuple[bytes, int]:
        self.sock.settimeout(timeout)
        (stamp,) = STAMP.unpack(_recv_exact(self.sock, STAMP.size))
        header = _recv_exact(self.sock, HEADER_SIZE)
        length = HEADER.unpack(header)[3]
        payload = _recv_exact(self.sock, length) if length else b""
        return header + payload, stamp

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    abort = close


class TcpTransport:
    """Endpoints of a single party; call :meth:`connect` before use."""

    def __init__(
        self,
        pid: PartyId,
        listen: str,
        peers: dict,
        *,
        session_id: int,
        ring_bits: int,
        frac_bits: int,
        timeout: float = 10.0,
    ):
        self.pid = PartyId(pid)
        self.listen = parse_address(listen)
        self.peers = {PartyId(k): parse_address(v) for k, v in peers.items()}
        self.session_id = session_id
        self.ring_bits = ring_bits
        self.frac_bits = frac_bits
        self.timeout = timeout
        self._out: dict = {}
        self._in: dict = {}
        self._server: socket.socket | None = None

    def _hello(self) -> bytes:
        return HELLO.pack(MAGIC, int(self.pid), self.ring_bits, self.frac_bits, self.session_id)

    def _check_hello(self, data: bytes) -> PartyId:
        magic, pid, bits, frac, sid = HELLO.unpack(data)
        if magic != MAGIC:
            raise HandshakeError("bad handshake magic")
        if bits != self.ring_bits or frac != self.frac_bits or sid != self.session_id:
            raise HandshakeError(
                f"parameter mismatch with P{pid + 1}: ring {bits} vs {self.ring_bits}, "
                f"frac {frac} vs {self.frac_bits}, session {sid:#x} vs {self.session_id:#x}"
            )
        if pid not in (p.value for p in self.peers):
            raise HandshakeError(f"unexpected peer id {pid}")
        return PartyId(pid)

    def _accept_loop(self, errors: list) -> None:
        deadline = time.monotonic() + self.timeout
        try:
            while len(self._in) < 2:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise TransportError("timed out waiting for peers to connect")
                self._server.settimeout(remaining)
                try:
                    conn, _ = self._server.accept()
                except socket.timeout:
                    continue
                conn.settimeout(self.timeout)
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                try:
                    peer = self._check_hello(_recv_exact(conn, HELLO.size))
                except HandshakeError:
                    conn.sendall(REJECT)
                    conn.close()
                    raise
                conn.sendall(ACK)
                self._in[peer] = TcpInChannel(conn)
        except Exception as exc:  # surfaced by connect()
            errors.append(exc)

    def _dial(self, peer: PartyId) -> None:
        deadline = time.monotonic() + self.timeout
        addr = self.peers[peer]
        last: Exception | None = None
        while time.monotonic() < deadline:
            try:
                sock = socket.create_connection(addr, timeout=max(0.1, deadline - time.monotonic()))
                break
            except OSError as exc:
                last = exc
                time.sleep(0.05)
        else:
            raise TransportError(f"cannot reach {peer.label} at {addr[0]}:{addr[1]}: {last}")
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(self.timeout)
        sock.sendall(self._hello())
        reply = _recv_exact(sock, 1)
        if reply != ACK:
            sock.close()
            raise HandshakeError(f"{peer.label} rejected the session parameters")
        self._out[peer] = TcpOutChannel(sock)

    def connect(self) -> "TcpTransport":
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            srv.bind(self.listen)
        except OSError as exc:
            raise TransportError(f"cannot listen on {self.listen}: {exc}") from exc
        srv.listen(4)
        self._server = srv
        errors: list = []
        acceptor = threading.Thread(target=self._accept_loop, args=(errors,), daemon=True)
        acceptor.start()
        try:
            for peer in (self.pid.next, self.pid.prev):
                self._dial(peer)
        finally:
            acceptor.join(self.timeout + 1)
        if errors:
            raise errors[0]
        if len(self._in) < 2:
            raise TransportError("peers did not connect in time")
        return self

    def endpoints(self, pid: PartyId) -> dict:
        if PartyId(pid) != self.pid:
            raise ValueError("a TCP transport only serves its own party")
        return {peer: (self._out[peer], self._in[peer]) for peer in (self.pid.next, self.pid.prev)}

    def close(self) -> None:
        for ch in list(self._out.values()) + list(self._in.values()):
            ch.close()
        if self._server is not None:
            self._server.close()

    abort = close
