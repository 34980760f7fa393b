# src/protocol/bits.py
"""
Bit strings and the encode/decode rule.

Alice announces c_i = 0 when her Z outcome equals the secret bit and 1
otherwise, which is c = m XOR a. Bob recovers m' = c XOR b.

Example:
    >>> m = BitString.from_text("0100100")
    >>> a = BitString.from_text("0110001")
    >>> c = alice_encode(m, a)
    >>> c.to_text()
    '0010101'
    >>> bob_decode(c, a).to_text()
    '0100100'
"""

from dataclasses import dataclass
from typing import Iterable, Iterator, Tuple

import numpy as np

from src.errors import LengthMismatchError
from src.quantum.rng import RandomStream, StreamId

# Lane of Alice's stream reserved for --random-bits messages.
MESSAGE_LANE = 1 << 32


@dataclass(frozen=True)
class BitString:
    """Ordered 0/1 sequence; external form is ASCII text such as '0100100'."""

    bits: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        bits = tuple(int(bit) for bit in self.bits)
        if any(bit not in (0, 1) for bit in bits):
            raise ValueError(f"bit strings hold only 0/1 entries, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_text(cls, text: str) -> "BitString":
        text = text.strip()
        if any(char not in "01" for char in text):
            raise ValueError(f"not a bit string: {text!r}")
        return cls(tuple(int(char) for char in text))

    @classmethod
    def of(cls, bits: Iterable[int]) -> "BitString":
        return cls(tuple(bits))

    def to_text(self) -> str:
        return "".join(str(bit) for bit in self.bits)

    def as_array(self) -> np.ndarray:
        return np.fromiter(self.bits, dtype=np.uint8, count=len(self.bits))

    @property
    def length(self) -> int:
        return len(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    def __getitem__(self, index: int) -> int:
        return self.bits[index]

    def __str__(self) -> str:
        return self.to_text()

    def __xor__(self, other: "BitString") -> "BitString":
        if len(self) != len(other):
            raise LengthMismatchError("xor of unequal bit strings", details={"left": len(self), "right": len(other)})
        return BitString(tuple(left ^ right for left, right in zip(self.bits, other.bits)))


def alice_encode(message: BitString, outcomes_a: BitString) -> BitString:
    """Announcement c with c_i = m_i XOR a_i."""
    if len(message) != len(outcomes_a):
        raise LengthMismatchError(
            "alice_encode needs one outcome per message bit",
            details={"message": len(message), "outcomes": len(outcomes_a)},
        )
    return message ^ outcomes_a


def bob_decode(announcement: BitString, outcomes_b: BitString) -> BitString:
    """Recovered message m' with m'_i = c_i XOR b_i."""
    if len(announcement) != len(outcomes_b):
        raise LengthMismatchError(
            "bob_decode needs one outcome per announced bit",
            details={"announcement": len(announcement), "outcomes": len(outcomes_b)},
        )
    return announcement ^ outcomes_b


def random_message(seed: int, length: int) -> BitString:
    """Uniform message for --random-bits, drawn off Alice's protocol lanes."""
    if length < 0:
        raise ValueError(f"message length must be >= 0, got {length}")
    stream = RandomStream(seed, StreamId.ALICE).child(MESSAGE_LANE)
    return BitString(tuple(stream.bits(length)))


def bit_errors(sent: BitString, received: BitString) -> int:
    """Hamming distance between equal-length strings."""
    return sum((sent ^ received).bits)
