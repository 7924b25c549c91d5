"""Communication accounting per (phase, party)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class Counter:
    messages: int = 0
    bytes: int = 0
    rounds: int = 0

    def as_dict(self) -> dict:
        return {"messages": self.messages, "bytes": self.bytes, "rounds": self.rounds}


@dataclass
class CommStats:
    """``data[phase][party_label]`` -> Counter. Phases keep first-seen order."""

    data: dict = field(default_factory=dict)

    def counter(self, phase: str, party: str) -> Counter:
        return self.data.setdefault(phase, {}).setdefault(party, Counter())

    def record_send(self, phase: str, party: str, nbytes: int) -> None:
        c = self.counter(phase, party)
        c.messages += 1
        c.bytes += nbytes

    def add_rounds(self, phase: str, party: str, rounds: int) -> None:
        self.counter(phase, party).rounds += rounds

    @property
    def phases(self) -> list[str]:
        return list(self.data)

    def bytes(self, phase: str | None = None) -> int:
        phases = [phase] if phase else self.phases
        return sum(c.bytes for ph in phases for c in self.data.get(ph, {}).values())

    def messages(self, phase: str | None = None) -> int:
        phases = [phase] if phase else self.phases
        return sum(c.messages for ph in phases for c in self.data.get(ph, {}).values())

    def rounds(self, phase: str | None = None) -> int:
        """Longest dependency chain; per phase the max over parties, summed over phases."""
        phases = [phase] if phase else self.phases
        return sum(max((c.rounds for c in self.data.get(ph, {}).values()), default=0) for ph in phases)

    def merge(self, other: "CommStats") -> "CommStats":
        for ph, parties in other.data.items():
            for p, c in parties.items():
                mine = self.counter(ph, p)
                mine.messages += c.messages
                mine.bytes += c.bytes
                mine.rounds += c.rounds
        return self

    def without(self, *phases: str) -> "CommStats":
        return CommStats({ph: v for ph, v in self.data.items() if ph not in phases})

    def to_dict(self) -> dict:
        return {ph: {p: c.as_dict() for p, c in sorted(parties.items())} for ph, parties in self.data.items()}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CommStats) and self.to_dict() == other.to_dict()
