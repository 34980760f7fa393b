# src/errors.py
"""
Exception hierarchy for the EPR direct-communication toolkit.

Every error raised on purpose by the simulator derives from EprError so the
CLI can map failures to exit codes in one place:

    ConfigError, LengthMismatchError, ...  -> usage / input problems
    ProtocolViolation                        -> exit code 3
    TransportError                           -> broker or peer unreachable
"""

from typing import Any, Dict, Optional


class EprError(Exception):
    """
    Base class for all simulator errors.

    Attributes:
        message: Explanation of the failure.
        details: Optional structured context (labels, lengths, frame types).

    Example:
        >>> raise LengthMismatchError("alice_encode", details={"message": 7, "outcomes": 6})
        LengthMismatchError: alice_encode (message=7, outcomes=6)
    """

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        self.message = message
        self.details = dict(details) if details else {}

        if self.details:
            context = ", ".join(f"{key}={value}" for key, value in self.details.items())
            full_message = f"{message} ({context})"
        else:
            full_message = message

        super().__init__(full_message)


class QuantumStateError(EprError):
    """State vector is not finite or not normalized within tolerance."""


class UnknownQubitError(EprError):
    """A gate or measurement named a label the state does not carry."""


class AlreadyMeasuredError(EprError):
    """A (pair, label) was measured a second time."""


class LengthMismatchError(EprError):
    """Two bit strings that must be aligned have different lengths."""


class InsufficientPairsError(EprError):
    """The batch does not hold enough check or message pairs."""


class ConfigError(EprError):
    """Invalid session or run configuration."""


class EveAbsentError(EprError):
    """Eve-side decoding was requested for a channel without an eavesdropper."""


class FrameError(EprError):
    """A wire frame is malformed: bad length prefix, bad JSON or missing fields."""


class ProtocolViolation(EprError):
    """A peer broke the phase ordering or the frame contract."""


class TransportError(EprError):
    """The classical channel failed: refused connection, EOF or timeout."""


class FrameTimeoutError(TransportError):
    """No frame arrived within the per-frame timeout."""
