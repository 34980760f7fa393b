# src/protocol/transcript.py
"""
Full record of one protocol run and its JSONL form.

The JSONL object is the only interchange format between the simulator and
the stats command: every summary number must be recomputable from it.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from src.adversary.attacks import AttackModel
from src.protocol.bits import BitString, bit_errors
from src.security.channel_test import TestVerdict, Verdict

# Configure module logger
logger = logging.getLogger(__name__)

# Classical bits per secret bit for the teleportation-based scheme; reported
# next to our measured ratio, never simulated.
TELEPORTATION_BITS_PER_SECRET_BIT = 2.0

RECORD_FIELDS = (
    "seed", "attack", "n_check", "verdict", "message", "announcement", "decoded",
    "classical_bits", "eve_guess", "kept_rounds", "mismatches", "attempt",
    "abort_reason", "distribution",
)


def _optional_bits(value: Optional[str]) -> Optional[BitString]:
    return None if value is None else BitString.from_text(value)


@dataclass
class Transcript:
    """
    One session, fully populated whatever the verdict.

    Invariants:
        - classical_bits_sent == len(announcement) (message phase only)
        - len(decoded) == len(announcement)
        - verdict Abort => empty announcement, empty decoded, no eve_guess
    """

    seed: int
    attack: AttackModel
    n_check: int
    message: BitString
    verdict: Verdict
    test: Optional[TestVerdict] = None
    basis_choices: Dict[str, List[str]] = field(default_factory=dict)
    outcomes_a: BitString = field(default_factory=BitString)
    outcomes_b: BitString = field(default_factory=BitString)
    outcomes_e: Optional[BitString] = None
    announcement: BitString = field(default_factory=BitString)
    decoded: BitString = field(default_factory=BitString)
    classical_bits_sent: int = 0
    eve_guess: Optional[BitString] = None
    kept_rounds: int = 0
    mismatches: int = 0
    attempt: int = 0
    abort_reason: Optional[str] = None
    distribution: str = "server"
    phases: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS

    @property
    def bob_errors(self) -> int:
        return bit_errors(self.message, self.decoded) if self.passed else 0

    @property
    def bits_per_secret_bit(self) -> Optional[float]:
        if not self.passed or len(self.message) == 0:
            return None
        return self.classical_bits_sent / len(self.message)

    @property
    def eve_correct_fraction(self) -> Optional[float]:
        if self.eve_guess is None or len(self.message) == 0:
            return None
        return 1.0 - bit_errors(self.message, self.eve_guess) / len(self.message)

    def check_invariants(self) -> None:
        """Raise ValueError if the record is inconsistent."""
        if self.classical_bits_sent != len(self.announcement):
            raise ValueError("classical bit count differs from the announcement length")
        if len(self.decoded) != len(self.announcement):
            raise ValueError("decoded length differs from the announcement length")
        if not self.passed and (len(self.announcement) or self.eve_guess is not None):
            raise ValueError("an aborted session carries a message-phase announcement")

    def to_record(self) -> Dict[str, Any]:
        """JSONL object; key order is fixed so output is byte-stable."""
        return {
            "seed": self.seed,
            "attack": self.attack.name,
            "n_check": self.n_check,
            "verdict": self.verdict.value,
            "message": self.message.to_text(),
            "announcement": self.announcement.to_text(),
            "decoded": self.decoded.to_text(),
            "classical_bits": self.classical_bits_sent,
            "eve_guess": None if self.eve_guess is None else self.eve_guess.to_text(),
            "kept_rounds": self.kept_rounds,
            "mismatches": self.mismatches,
            "attempt": self.attempt,
            "abort_reason": self.abort_reason,
            "distribution": self.distribution,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "Transcript":
        """
        Rebuild the summary view of a transcript from its JSONL object.

        Raises:
            KeyError / ValueError: missing fields or malformed values.
        """
        return cls(
            seed=int(record["seed"]),
            attack=AttackModel.parse(record["attack"]),
            n_check=int(record["n_check"]),
            message=BitString.from_text(record["message"]),
            verdict=Verdict(record["verdict"]),
            announcement=BitString.from_text(record["announcement"]),
            decoded=BitString.from_text(record["decoded"]),
            classical_bits_sent=int(record["classical_bits"]),
            eve_guess=_optional_bits(record.get("eve_guess")),
            kept_rounds=int(record.get("kept_rounds", 0)),
            mismatches=int(record.get("mismatches", 0)),
            attempt=int(record.get("attempt", 0)),
            abort_reason=record.get("abort_reason"),
            distribution=record.get("distribution", "server"),
        )
