from .frames import Frame, HEADER_SIZE, PHASE_TAGS, phase_tag
from .party import Party, TranscriptEntry
from .profiles import IDEAL, LAN, LOCALHOST, PROFILES, WAN, NetworkProfile, get_profile
from .session import SessionResult, make_party, run_party, run_session, session_id_from_seed
from .simulate import phase_times, replay
from .stats import CommStats, Counter
from .transport import InMemoryChannel, InMemoryTransport, ShapedChannel, shape

__all__ = [
    "CommStats",
    "Counter",
    "Frame",
    "HEADER_SIZE",
    "IDEAL",
    "InMemoryChannel",
    "InMemoryTransport",
    "LAN",
    "LOCALHOST",
    "NetworkProfile",
    "PHASE_TAGS",
    "PROFILES",
    "Party",
    "SessionResult",
    "ShapedChannel",
    "TranscriptEntry",
    "WAN",
    "get_profile",
    "make_party",
    "phase_tag",
    "phase_times",
    "replay",
    "run_party",
    "run_session",
    "session_id_from_seed",
    "shape",
]
