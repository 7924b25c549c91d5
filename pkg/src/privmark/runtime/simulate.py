"""Replay recorded party traces under a network profile.

Each party's trace is a list of events: ``("c", seconds)`` local compute,
``("s", peer, nbytes)`` a send, ``("r", peer)`` a blocking receive and
``("p", phase)`` a phase switch. Replaying charges compute time as measured
and every message latency + bits / bandwidth on its directed link, with
messages on one link serialised behind each other. Every phase is replayed
from time zero, so the result is the critical-path time of that phase.

The replay is a max-plus system, so higher latency or lower bandwidth can
never make any phase faster; this is what makes the bench ordering of
network profiles well defined.
"""

from __future__ import annotations

from collections import defaultdict, deque

from .profiles import NetworkProfile


def split_phases(trace: list) -> dict:
    """Group events by the phase they occurred in (first-seen order)."""
    out: dict = {}
    phase = "Default"
    for ev in trace:
        if ev[0] == "p":
            phase = ev[1]
            continue
        out.setdefault(phase, []).append(ev)
    return out


def replay(traces: list, profile: NetworkProfile, compute_scale: float = 1.0) -> float:
    """Makespan of one phase given the three parties' event lists."""
    n = len(traces)
    pos = [0] * n
    clock = [0.0] * n
    inbox: dict = defaultdict(deque)  # (src, dst) -> deliver times
    free_at: dict = defaultdict(float)
    progress = True
    while progress:
        progress = False
        for p in range(n):
            events = traces[p]
            while pos[p] < len(events):
                ev = events[pos[p]]
                kind = ev[0]
                if kind == "c":
                    clock[p] += ev[1] * compute_scale
                elif kind == "s":
                    link = (p, ev[1])
                    start = max(clock[p], free_at[link])
                    free_at[link] = start + profile.transmit_time(ev[2])
                    inbox[link].append(free_at[link] + profile.latency)
                elif kind == "r":
                    q = inbox[(ev[1], p)]
                    if not q:
                        break
                    clock[p] = max(clock[p], q.popleft())
                pos[p] += 1
                progress = True
    if any(pos[p] < len(traces[p]) for p in range(n)):
        raise ValueError("trace replay deadlocked: unmatched receive")
    return max(clock, default=0.0)


def phase_times(traces: list, profile: NetworkProfile, compute_scale: float = 1.0) -> dict:
    """Simulated seconds per phase for a completed session."""
    per_party = [split_phases(t) for t in traces]
    phases: list = []
    for pp in per_party:
        for ph in pp:
            if ph not in phases:
                phases.append(ph)
    return {
        ph: replay([pp.get(ph, []) for pp in per_party], profile, compute_scale) for ph in phases
    }
