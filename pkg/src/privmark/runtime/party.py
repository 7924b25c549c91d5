"""Per-party protocol runtime.

A :class:`Party` owns the two outbound and two inbound channels of one
computing party, frames every message, checks sequence numbers, keeps the
communication counters and a replayable trace, and holds the correlated
randomness set up at the start of a session.

Rounds use logical clocks that restart at every phase boundary: a message
is stamped with the sender's clock plus one and a receive advances the
clock to at least the stamp. At the end of a phase the "level" of a party
(its clock, or the highest stamp it has sent) is the length of the longest
send-to-receive dependency chain ending at that party.
"""

from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass

import numpy as np

from ..errors import DesyncError
from ..numeric import Ring
from ..sharing import PartyId, ZeroShareContext
from .frames import Frame, SequenceChecker, pack_elements, phase_tag, unpack_elements
from .stats import CommStats

KEY_BITS = 128
DEFAULT_PHASE = "Default"


def int_to_elements(value: int, ring: Ring, bits: int = KEY_BITS) -> np.ndarray:
    """Split a ``bits``-wide integer into little-endian ring elements."""
    w = ring.bits
    mask = (1 << w) - 1
    return np.array([(value >> (i * w)) & mask for i in range(bits // w)], dtype=np.uint64)


def elements_to_int(arr: np.ndarray, ring: Ring) -> int:
    return sum(int(v) << (i * ring.bits) for i, v in enumerate(arr))


def derived_rng(seed: int, pid: PartyId, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, int(pid) + 1, tag]))


@dataclass(frozen=True)
class TranscriptEntry:
    src: str
    dst: str
    phase: str
    kind: str
    payload: bytes


class Party:
    def __init__(
        self,
        pid: PartyId,
        endpoints: dict,
        *,
        ring: Ring,
        frac_bits: int,
        session_id: int,
        rng: np.random.Generator,
        timeout: float | None = 60.0,
        keep_transcript: bool = True,
        seed: int | None = None,
    ):
        self.id = PartyId(pid)
        self.seed = seed
        self.ring = ring
        self.frac_bits = frac_bits
        self.session_id = session_id
        self.rng = rng
        self.timeout = timeout
        self.keep_transcript = keep_transcript
        self._out = {peer: ends[0] for peer, ends in endpoints.items()}
        self._in = {peer: ends[1] for peer, ends in endpoints.items()}
        self._seq = {peer: 0 for peer in endpoints}
        self._checkers = {peer: SequenceChecker(session_id) for peer in endpoints}
        self.zero: ZeroShareContext | None = None
        self.stats = CommStats()
        self.transcript: list[TranscriptEntry] = []
        self.trace: list[tuple] = []
        self.clock = 0
        self.max_sent = 0
        self.current_phase = DEFAULT_PHASE
        self._cpu_mark = time.thread_time()
        self.wall: dict = {}  # phase -> wall seconds inside phase blocks

    @property
    def level(self) -> int:
        return max(self.clock, self.max_sent)

    def _mark_compute(self) -> None:
        now = time.thread_time()
        self.trace.append(("c", now - self._cpu_mark))
        self._cpu_mark = now

    def derived_rng(self, tag: int) -> np.random.Generator:
        """Independent stream for one purpose, reproducible from the session seed."""
        if self.seed is None:
            return np.random.default_rng(self.rng.integers(0, 2**63))
        return derived_rng(self.seed, self.id, tag)

    # -- phases --------------------------------------------------------------

    def _close_segment(self) -> None:
        self.stats.add_rounds(self.current_phase, self.id.label, self.level)
        self.clock = self.max_sent = 0

    @contextlib.contextmanager
    def phase(self, name: str):
        """Attribute traffic and rounds inside the block to ``name``."""
        self._mark_compute()
        self._close_segment()
        outer = self.current_phase
        self.current_phase = name
        start = time.perf_counter()
        self.stats.counter(name, self.id.label)
        self.trace.append(("p", name))
        try:
            yield self
        finally:
            self._mark_compute()
            self._close_segment()
            self.wall[name] = self.wall.get(name, 0.0) + time.perf_counter() - start
            self.current_phase = outer
            self.trace.append(("p", outer))

    def finish(self) -> None:
        self._mark_compute()
        self._close_segment()

    # -- messaging -----------------------------------------------------------

    def send(self, to: PartyId, values, kind: str = "share") -> None:
        to = PartyId(to)
        payload = pack_elements(values, self.ring)
        frame = Frame(self.session_id, phase_tag(self.current_phase), self._seq[to], payload)
        self._seq[to] += 1
        stamp = self.clock + 1
        self.max_sent = max(self.max_sent, stamp)
        self._mark_compute()
        self._out[to].send(frame.encode(), stamp)
        self.stats.record_send(self.current_phase, self.id.label, len(payload))
        self.trace.append(("s", int(to), len(payload)))
        if self.keep_transcript:
            self.transcript.append(TranscriptEntry(self.id.label, to.label, self.current_phase, kind, payload))

    def recv(self, frm: PartyId, shape) -> np.ndarray:
        frm = PartyId(frm)
        self._mark_compute()
        data, stamp = self._in[frm].recv(self.timeout)
        frame = Frame.decode(data)
        self._checkers[frm].check(frame)
        if frame.phase != phase_tag(self.current_phase):
            raise DesyncError(
                f"{self.id.label} in phase {self.current_phase} got a frame tagged {frame.phase} from {frm.label}"
            )
        self.clock = max(self.clock, stamp)
        self.trace.append(("r", int(frm)))
        self._cpu_mark = time.thread_time()
        return unpack_elements(frame.payload, self.ring, tuple(shape))

    # -- session setup ---------------------------------------------------------

    def setup(self) -> None:
        """Pairwise PRF keys: each party draws the key it shares with next(p).

        Keys travel in the clear over the party channels, which is enough for
        honest-but-curious parties; deployments should use authenticated,
        encrypted links.
        """
        with self.phase("Setup"):
            key_next = int.from_bytes(self.rng.bytes(KEY_BITS // 8), "little")
            self.send(self.id.next, int_to_elements(key_next, self.ring), kind="key")
            key_prev = elements_to_int(self.recv(self.id.prev, (KEY_BITS // self.ring.bits,)), self.ring)
            self.zero = ZeroShareContext(self.id, key_prev, key_next, self.ring)
