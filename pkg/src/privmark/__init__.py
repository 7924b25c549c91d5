"""Private text watermarking on a three-party replicated-sharing engine."""

from .errors import PrivMarkError
from .numeric import Ring, decode_fixed, encode_fixed
from .runtime import run_session
from .sharing import PartyId, ReplicatedShare

__version__ = "0.1.0"
__all__ = ["PrivMarkError", "Ring", "PartyId", "ReplicatedShare", "run_session", "encode_fixed", "decode_fixed"]
