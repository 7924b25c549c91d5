"""Running one protocol program on three parties."""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..errors import TransportError
from ..numeric import DEFAULT_FRAC_BITS, DEFAULT_RING_BITS, Ring
from ..sharing import PartyId
from .party import Party
from .profiles import NetworkProfile
from .simulate import phase_times
from .stats import CommStats
from .transport import InMemoryTransport, shape

Program = Callable[[Party, Any], Any]


def session_id_from_seed(seed: int) -> int:
    state = np.random.SeedSequence([seed, 0x5E55]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 32) | int(state[1])


def party_rng(seed: int, pid: PartyId) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, int(pid) + 1]))


@dataclass
class SessionResult:
    outputs: list
    stats: CommStats
    transcripts: dict
    traces: list
    elapsed: float
    parties: list = field(repr=False, default_factory=list)

    def transcript(self) -> list:
        """All messages in a fixed order: by sender, then send order."""
        return [e for pid in PartyId for e in self.transcripts[pid.label]]

    def transcript_digest(self) -> str:
        h = hashlib.sha256()
        for e in self.transcript():
            h.update(f"{e.src}>{e.dst}|{e.phase}|{e.kind}|{len(e.payload)}|".encode())
            h.update(e.payload)
        return h.hexdigest()

    def simulated_times(self, profile: NetworkProfile, compute_scale: float = 1.0) -> dict:
        return phase_times(self.traces, profile, compute_scale)

    def simulated_elapsed(self, profile: NetworkProfile, compute_scale: float = 1.0) -> float:
        return sum(self.simulated_times(profile, compute_scale).values())


def make_party(pid: PartyId, endpoints: dict, *, ring_bits: int, frac_bits: int, seed: int,
               session_id: int | None = None, timeout: float | None = 60.0,
               keep_transcript: bool = True) -> Party:
    return Party(
        pid,
        endpoints,
        ring=Ring(ring_bits),
        frac_bits=frac_bits,
        session_id=session_id_from_seed(seed) if session_id is None else session_id,
        rng=party_rng(seed, pid),
        timeout=timeout,
        keep_transcript=keep_transcript,
        seed=seed,
    )


def run_party(program: Program, party: Party, inp=None):
    """Setup plus program on one party (used directly by TCP nodes)."""
    party.setup()
    out = program(party, inp)
    party.finish()
    return out


def run_session(
    program: Program,
    topology: str = "memory",
    profile: NetworkProfile | None = None,
    *,
    ring_bits: int = DEFAULT_RING_BITS,
    frac_bits: int = DEFAULT_FRAC_BITS,
    seed: int = 0,
    inputs=None,
    timeout: float | None = 60.0,
    keep_transcript: bool = True,
) -> SessionResult:
    """Run ``program(party, input)`` on three in-process parties.

    ``inputs`` is a sequence or mapping indexed by party id. When ``profile``
    is given, every message is delayed in real time by that profile; the
    deterministic alternative is :meth:`SessionResult.simulated_times`.
    """
    if topology != "memory":
        raise ValueError("run_session drives in-memory parties; TCP parties run one per process via run_party")
    transport = InMemoryTransport()
    if profile is not None:
        transport = shape(profile, transport)
    parties = [
        make_party(pid, transport.endpoints(pid), ring_bits=ring_bits, frac_bits=frac_bits, seed=seed,
                   timeout=timeout, keep_transcript=keep_transcript)
        for pid in PartyId
    ]
    outputs: list = [None] * 3
    errors: list = [None] * 3

    def worker(i: int) -> None:
        inp = None if inputs is None else inputs[i]
        try:
            outputs[i] = run_party(program, parties[i], inp)
        except BaseException as exc:  # noqa: BLE001 - re-raised in the caller
            errors[i] = exc
            transport.abort()

    start = time.perf_counter()
    threads = [threading.Thread(target=worker, args=(i,), name=f"party-{i + 1}") for i in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    elapsed = time.perf_counter() - start

    raised = [e for e in errors if e is not None]
    if raised:
        # the first party to fail causes TransportErrors at the others
        primary = [e for e in raised if not isinstance(e, TransportError)]
        raise (primary or raised)[0]

    stats = CommStats()
    for p in parties:
        stats.merge(p.stats)
    return SessionResult(
        outputs=outputs,
        stats=stats,
        transcripts={p.id.label: p.transcript for p in parties},
        traces=[p.trace for p in parties],
        elapsed=elapsed,
        parties=parties,
    )
