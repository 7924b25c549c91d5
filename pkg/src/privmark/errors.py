"""Exception hierarchy shared by the engine, the pipeline and the CLI."""


class PrivMarkError(Exception):
    """Base class for every error raised by this package."""


class RangeError(PrivMarkError, ValueError):
    pass


class ShapeError(PrivMarkError, ValueError):
    pass


class ConsistencyError(PrivMarkError):
    """Overlapping replicated components disagree."""


class DesyncError(PrivMarkError):
    """Parties lost lockstep (PRF counters or frame sequence numbers)."""


class TransportError(PrivMarkError):
    pass


class HandshakeError(PrivMarkError):
    """Peers disagree on session parameters (ring width, fraction bits, session id)."""


class FormatError(PrivMarkError, ValueError):
    pass


class ZeroRowError(FormatError):
    pass


class DuplicateWordError(FormatError):
    pass


class SizeError(PrivMarkError, ValueError):
    pass


class EmptyTextError(PrivMarkError, ValueError):
    pass


class InserterError(PrivMarkError):
    pass
