# src/adversary/eve.py
"""
Eve's side of a session.

Eve reads the public channel but only ever sees the message announcement
after the verdict was published, because the session only reaches the
announcement on Pass. With the probe she then Z-measures her E qubits; after
intercept-resend she already holds one bit per pair. Either way her guess is
c XOR e.
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional

from src.adversary.attacks import AttackModel, EveHandle
from src.errors import EveAbsentError, LengthMismatchError
from src.protocol.bits import BitString
from src.quantum.state import Basis

if TYPE_CHECKING:
    from src.protocol.pairs import PairBatch

# Configure module logger
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EveObservation:
    pair_index: int
    basis: Basis
    outcome: int


@dataclass
class EveRecord:
    """
    Eve's per-pair observations for the message pairs, plus her guess.

    Attributes:
        observations: One entry per message pair, in announcement order.
        guess: Her reconstruction of the message (None until decoded).
        correct_fraction: Share of guessed bits equal to the real message.
    """

    observations: List[EveObservation] = field(default_factory=list)
    guess: Optional[BitString] = None
    correct_fraction: Optional[float] = None

    @property
    def outcomes(self) -> BitString:
        return BitString.of(observation.outcome for observation in self.observations)


def eve_decode(model: AttackModel, eve_records: EveRecord, announcement: BitString) -> BitString:
    """
    Eve's guess: guess_i = c_i XOR e_i.

    Raises:
        EveAbsentError: honest channel, Eve holds nothing.
        LengthMismatchError: record and announcement differ in length.
    """
    if not model.has_eve:
        raise EveAbsentError("eve_decode is not applicable to an honest channel")
    outcomes = eve_records.outcomes
    if len(outcomes) != len(announcement):
        raise LengthMismatchError(
            "Eve's record does not cover the announcement",
            details={"record": len(outcomes), "announcement": len(announcement)},
        )
    return announcement ^ outcomes


class Eavesdropper:
    """
    Per-session Eve state.

    Example:
        >>> eve = Eavesdropper(AttackModel.ghz_probe())
        >>> record = eve.observe_announcement(batch, batch.message_indices, announcement)
        >>> record.guess
    """

    def __init__(self, model: AttackModel) -> None:
        if not model.has_eve:
            raise EveAbsentError("no eavesdropper on an honest channel")
        self.model = model
        self.record = EveRecord()

    def _observe(self, pair_index: int, handle: EveHandle, batch: "PairBatch") -> EveObservation:
        if handle.holds_qubit:
            outcome = batch.measure(pair_index, handle.label, Basis.Z)
            return EveObservation(pair_index, Basis.Z, outcome)
        return EveObservation(pair_index, handle.basis, handle.outcome)

    def observe_announcement(
        self, batch: "PairBatch", message_indices: List[int], announcement: BitString
    ) -> EveRecord:
        """Collect e for every message pair, then decode the public announcement."""
        handles = batch.eve_handles(message_indices)
        self.record.observations = [
            self._observe(index, handle, batch) for index, handle in zip(message_indices, handles)
        ]
        self.record.guess = eve_decode(self.model, self.record, announcement)
        logger.debug("Eve decoded %d bits from %s", len(self.record.guess), self.model.name)
        return self.record

    def score(self, message: BitString) -> float:
        """Fill in and return correct_fraction against the real message."""
        guess = self.record.guess
        if guess is None or len(guess) != len(message):
            raise LengthMismatchError("Eve has no guess of matching length")
        errors = sum((guess ^ message).bits)
        self.record.correct_fraction = 1.0 - errors / len(message) if len(message) else 1.0
        return self.record.correct_fraction
