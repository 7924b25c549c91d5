from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class NetworkProfile:
    name: str
    bandwidth: float  # bits per second
    latency: float  # seconds, one way

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.latency < 0:
            raise ValueError("latency must be non-negative")

    def transmit_time(self, nbytes: int) -> float:
        if math.isinf(self.bandwidth):
            return 0.0
        return nbytes * 8 / self.bandwidth

    def delay(self, nbytes: int) -> float:
        return self.latency + self.transmit_time(nbytes)

    def to_dict(self) -> dict:
        return {"name": self.name, "bandwidth": self.bandwidth, "latency": self.latency}


LOCALHOST = NetworkProfile("localhost", 26e9, 0.05e-3)
LAN = NetworkProfile("lan", 1.5e9, 1.5e-3)
WAN = NetworkProfile("wan", 400e6, 10e-3)
IDEAL = NetworkProfile("ideal", math.inf, 0.0)

PROFILES = {p.name: p for p in (LOCALHOST, LAN, WAN, IDEAL)}


def get_profile(name: str, bandwidth: float | None = None, latency: float | None = None) -> NetworkProfile:
    if name == "custom":
        if bandwidth is None or latency is None:
            raise ValueError("custom profile needs bandwidth and latency")
        return NetworkProfile("custom", bandwidth, latency)
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown network profile {name!r}; choose from {sorted(PROFILES)} or custom") from None
