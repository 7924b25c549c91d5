"""Per-phase cost of insertion and detection under several network profiles.

The default engine runs the protocols once on in-memory parties and replays
the recorded traces under each profile (see ``runtime.simulate``). With
``realtime=True`` the session is re-run per profile on a transport that
delays every message in real time, and wall-clock phase times are reported
instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .pipeline.tokenizer import tokenize
from .runtime.profiles import NetworkProfile, get_profile
from .service import Config, World, insert_program, run_memory

BENCH_PHASES = ("Embed", "Cosine", "Topk", "Insert", "Detect")
DEFAULT_PROFILES = ("localhost", "lan", "wan")


@dataclass
class BenchRow:
    phase: str
    seconds: dict  # profile name -> seconds (mean over repetitions)
    bytes: int
    rounds: int
    messages: int

    @property
    def megabytes(self) -> float:
        return self.bytes / 1e6

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "seconds": dict(self.seconds),
            "comm_mb": self.megabytes,
            "bytes": self.bytes,
            "rounds": self.rounds,
            "messages": self.messages,
        }


@dataclass
class BenchReport:
    profiles: list
    rows: list = field(default_factory=list)
    engine: str = "replay"
    repetitions: int = 1
    text_words: int = 0
    vocabulary_size: int = 0

    def row(self, phase: str) -> BenchRow:
        return next(r for r in self.rows if r.phase == phase)

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "repetitions": self.repetitions,
            "profiles": [p.to_dict() for p in self.profiles],
            "text_words": self.text_words,
            "vocabulary_size": self.vocabulary_size,
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def table(self) -> str:
        names = [p.name for p in self.profiles]
        head = ["Phase"] + [f"{n} (s)" for n in names] + ["Comm (MB)", "Rounds"]
        body = [
            [r.phase] + [f"{r.seconds[n]:.4f}" for n in names] + [f"{r.megabytes:.4f}", str(r.rounds)]
            for r in self.rows
        ]
        widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
        fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))  # noqa: E731
        rule = "  ".join("-" * w for w in widths)
        return "\n".join([fmt(head), rule] + [fmt(r) for r in body])


def _profiles(names) -> list[NetworkProfile]:
    return [p if isinstance(p, NetworkProfile) else get_profile(p) for p in names]


def run_bench(world: World, cfg: Config, text: str, profiles=DEFAULT_PROFILES, repetitions: int = 1,
              phases=BENCH_PHASES, realtime: bool = False) -> BenchReport:
    """Insert then detect ``text`` ``repetitions`` times and tabulate each phase."""
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    profiles = _profiles(profiles)
    program = insert_program(world, cfg, text, detect_after=True)
    seconds = {ph: {p.name: 0.0 for p in profiles} for ph in phases}
    stats = None
    for _ in range(repetitions):
        if realtime:
            for prof in profiles:
                res = run_memory(program, cfg, keep_transcript=False, profile=prof)
                for ph in phases:
                    seconds[ph][prof.name] += max(p.wall.get(ph, 0.0) for p in res.parties)
        else:
            res = run_memory(program, cfg, keep_transcript=False)
            for prof in profiles:
                sim = res.simulated_times(prof)
                for ph in phases:
                    seconds[ph][prof.name] += sim.get(ph, 0.0)
        stats = res.stats
    report = BenchReport(profiles, engine="realtime" if realtime else "replay", repetitions=repetitions,
                         text_words=len(tokenize(text)), vocabulary_size=len(world.vocabulary))
    for ph in phases:
        report.rows.append(BenchRow(
            ph,
            {n: t / repetitions for n, t in seconds[ph].items()},
            stats.bytes(ph),
            stats.rounds(ph),
            stats.messages(ph),
        ))
    return report
