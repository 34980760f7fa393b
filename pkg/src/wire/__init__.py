"""
Wire Module
===========
Framed TCP harness: a pair broker plus Alice and Bob as separate processes.

Frames are a 4-byte big-endian length followed by a UTF-8 JSON object.
"""

from src.wire.broker import Broker, BrokerSession, broker_serve
from src.wire.framing import (
    MAX_FRAME_SIZE,
    FrameChannel,
    FrameType,
    WireFrame,
    open_channel,
    read_frame,
    write_frame,
)
from src.wire.roles import alice_session, bob_session, run_alice, run_bob, serve_bob

__all__ = [
    "MAX_FRAME_SIZE",
    "Broker",
    "BrokerSession",
    "FrameChannel",
    "FrameType",
    "WireFrame",
    "alice_session",
    "bob_session",
    "broker_serve",
    "open_channel",
    "read_frame",
    "run_alice",
    "run_bob",
    "serve_bob",
    "write_frame",
]
