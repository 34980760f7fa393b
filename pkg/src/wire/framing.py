# src/wire/framing.py
"""
Length-prefixed JSON frames for the classical channel.

Wire format (bit-exact):
    4 bytes   payload length, big-endian unsigned
    N bytes   UTF-8 JSON object {"type", "session", "seq", "body"}

Sequence numbers strictly increase per (session, sender); FrameChannel
checks that on every received frame.
"""

import asyncio
import json
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, Optional

from src.errors import FrameError, FrameTimeoutError, ProtocolViolation, TransportError

# Configure module logger
logger = logging.getLogger(__name__)

HEADER = struct.Struct(">I")
HEADER_SIZE = HEADER.size
MAX_FRAME_SIZE = 1 << 20


class FrameType(str, Enum):
    HELLO = "HELLO"
    PAIRS_READY = "PAIRS_READY"
    CHECK_BASIS = "CHECK_BASIS"
    CHECK_OUTCOME = "CHECK_OUTCOME"
    VERDICT = "VERDICT"
    ANNOUNCE = "ANNOUNCE"
    MEASURE_REQ = "MEASURE_REQ"
    MEASURE_RESP = "MEASURE_RESP"
    BYE = "BYE"
    ERROR = "ERROR"


@dataclass(frozen=True)
class WireFrame:
    """One framed message."""

    type: FrameType
    session: str
    seq: int
    body: Dict[str, Any] = field(default_factory=dict)

    def payload(self) -> bytes:
        document = {"type": self.type.value, "session": self.session, "seq": self.seq, "body": self.body}
        return json.dumps(document, separators=(",", ":"), sort_keys=True).encode("utf-8")

    def encode(self) -> bytes:
        payload = self.payload()
        if len(payload) > MAX_FRAME_SIZE:
            raise FrameError("frame too large", details={"size": len(payload), "max": MAX_FRAME_SIZE})
        return HEADER.pack(len(payload)) + payload

    @classmethod
    def from_payload(cls, payload: bytes) -> "WireFrame":
        """
        Parse a payload (without its length prefix).

        Raises:
            FrameError: not UTF-8 JSON, not an object, unknown type, bad fields.
        """
        try:
            document = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FrameError("payload is not UTF-8 JSON", details={"error": str(e)}) from None
        if not isinstance(document, dict):
            raise FrameError("payload is not a JSON object")
        missing = [key for key in ("type", "session", "seq", "body") if key not in document]
        if missing:
            raise FrameError("frame is missing fields", details={"missing": missing})
        try:
            frame_type = FrameType(document["type"])
        except ValueError:
            raise FrameError("unknown frame type", details={"type": document["type"]}) from None
        seq, session, body = document["seq"], document["session"], document["body"]
        if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
            raise FrameError("seq must be a non-negative integer", details={"seq": seq})
        if not isinstance(session, str) or not isinstance(body, dict):
            raise FrameError("session must be a string and body an object")
        return cls(frame_type, session, seq, body)

    @classmethod
    def decode(cls, data: bytes) -> "WireFrame":
        """Parse one complete frame; the length prefix must match exactly."""
        if len(data) < HEADER_SIZE:
            raise FrameError("frame shorter than its header", details={"size": len(data)})
        (length,) = HEADER.unpack(data[:HEADER_SIZE])
        if length != len(data) - HEADER_SIZE:
            raise FrameError(
                "length prefix does not match payload",
                details={"declared": length, "actual": len(data) - HEADER_SIZE},
            )
        return cls.from_payload(data[HEADER_SIZE:])


async def read_frame(reader: asyncio.StreamReader) -> Optional[WireFrame]:
    """
    Read one frame; None on a clean EOF between frames.

    Raises:
        FrameError: oversize declaration, truncated payload or bad JSON.
    """
    try:
        header = await reader.readexactly(HEADER_SIZE)
    except asyncio.IncompleteReadError as e:
        if not e.partial:
            return None
        raise FrameError("truncated frame header", details={"bytes": len(e.partial)}) from None
    (length,) = HEADER.unpack(header)
    if length > MAX_FRAME_SIZE:
        raise FrameError("frame too large", details={"declared": length, "max": MAX_FRAME_SIZE})
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError as e:
        raise FrameError(
            "length prefix does not match payload",
            details={"declared": length, "received": len(e.partial)},
        ) from None
    return WireFrame.from_payload(payload)


async def write_frame(writer: asyncio.StreamWriter, frame: WireFrame) -> None:
    writer.write(frame.encode())
    await writer.drain()


class FrameChannel:
    """
    One side of a framed connection inside a session.

    Numbers outgoing frames, validates incoming sequence numbers and applies
    the per-frame timeout. A listening side passes session=None and adopts
    the session named by the first frame it receives. An ERROR frame from
    the peer becomes a ProtocolViolation.
    """

    def __init__(
        self,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        session: Optional[str],
        timeout: Optional[float] = None,
        peer: str = "peer",
    ) -> None:
        self.reader = reader
        self.writer = writer
        self.session = session
        self.timeout = timeout
        self.peer = peer
        self._next_seq = 0
        self._last_peer_seq = -1

    async def send(self, frame_type: FrameType, body: Optional[Dict[str, Any]] = None) -> WireFrame:
        frame = WireFrame(frame_type, self.session, self._next_seq, dict(body or {}))
        self._next_seq += 1
        try:
            await write_frame(self.writer, frame)
        except (ConnectionError, OSError) as e:
            raise TransportError(f"cannot write to {self.peer}", details={"error": str(e)}) from None
        logger.debug("-> %s %s seq=%d", self.peer, frame_type.value, frame.seq)
        return frame

    async def send_error(self, reason: str, **extra: Any) -> None:
        try:
            await self.send(FrameType.ERROR, {"reason": reason, **extra})
        except TransportError:
            logger.debug("Could not deliver ERROR '%s' to %s", reason, self.peer)

    async def receive(self) -> WireFrame:
        """
        Next frame from the peer.

        Raises:
            FrameTimeoutError: nothing within the timeout.
            TransportError: connection closed.
            FrameError: malformed frame.
            ProtocolViolation: wrong session, non-increasing seq, or an ERROR frame.
        """
        try:
            frame = await asyncio.wait_for(read_frame(self.reader), timeout=self.timeout)
        except asyncio.TimeoutError:
            raise FrameTimeoutError(
                f"no frame from {self.peer} within {self.timeout}s", details={"reason": "timeout"}
            ) from None
        except (ConnectionError, OSError) as e:
            raise TransportError(f"connection to {self.peer} failed", details={"error": str(e)}) from None
        if frame is None:
            raise TransportError(f"{self.peer} closed the connection")
        if self.session is None:
            self.session = frame.session
        elif frame.session != self.session:
            raise ProtocolViolation("frame for another session", details={"session": frame.session})
        if frame.seq <= self._last_peer_seq:
            raise ProtocolViolation(
                "sequence number did not increase", details={"seq": frame.seq, "last": self._last_peer_seq}
            )
        self._last_peer_seq = frame.seq
        logger.debug("<- %s %s seq=%d", self.peer, frame.type.value, frame.seq)
        if frame.type == FrameType.ERROR:
            raise ProtocolViolation(
                f"{self.peer} reported an error", details={"reason": frame.body.get("reason", "unknown")}
            )
        return frame

    async def expect(self, *frame_types: FrameType) -> WireFrame:
        """Receive a frame and require one of the given types."""
        frame = await self.receive()
        if frame.type not in frame_types:
            expected = "/".join(frame_type.value for frame_type in frame_types)
            await self.send_error("protocol-violation", expected=expected, got=frame.type.value)
            raise ProtocolViolation(
                f"expected {expected} from {self.peer}", details={"got": frame.type.value}
            )
        return frame

    async def close(self) -> None:
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


async def open_channel(
    address: Iterable, session: str, timeout: Optional[float], peer: str
) -> FrameChannel:
    """Connect to host:port and wrap the streams; TransportError on failure."""
    host, port = address
    try:
        reader, writer = await asyncio.wait_for(asyncio.open_connection(host, port), timeout=timeout)
    except (ConnectionError, OSError, asyncio.TimeoutError) as e:
        raise TransportError(f"cannot reach {peer} at {host}:{port}", details={"error": str(e) or "timeout"}) from None
    return FrameChannel(reader, writer, session, timeout=timeout, peer=peer)
