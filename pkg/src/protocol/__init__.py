"""
Protocol Module
===============
Bit strings, the encode/decode rule, pair bookkeeping and session
configuration.

The session runner itself lives in src.protocol.session_graph and the
transcript type in src.protocol.transcript; import them from there.
"""

from src.protocol.bits import BitString, alice_encode, bit_errors, bob_decode, random_message
from src.protocol.config import (
    DistributionMode,
    SessionConfig,
    default_n_check,
    parse_endpoint,
    resolve_seed,
)
from src.protocol.pairs import (
    Pair,
    PairBatch,
    PairRole,
    Party,
    allocate_batch,
    build_batch,
    choose_check_indices,
)

__all__ = [
    "BitString",
    "DistributionMode",
    "Pair",
    "PairBatch",
    "PairRole",
    "Party",
    "SessionConfig",
    "alice_encode",
    "allocate_batch",
    "bit_errors",
    "bob_decode",
    "build_batch",
    "choose_check_indices",
    "default_n_check",
    "parse_endpoint",
    "random_message",
    "resolve_seed",
]
