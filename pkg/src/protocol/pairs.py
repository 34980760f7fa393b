# src/protocol/pairs.py
"""
Pair bookkeeping: which pairs are sacrificed for the channel test, who holds
which qubit, and which (pair, qubit) has already been measured.

The broker process and the in-process session both go through PairBatch, so
the "one measurement per (pair, label)" rule lives in one place.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from src.adversary.attacks import AttackModel, EveHandle, emit_pair
from src.errors import AlreadyMeasuredError, InsufficientPairsError, UnknownQubitError
from src.quantum.rng import RandomStream, StreamId
from src.quantum.state import Basis, StateVector, measure

# Configure module logger
logger = logging.getLogger(__name__)


class PairRole(str, Enum):
    CHECK = "check"
    MESSAGE = "message"


class Party(str, Enum):
    ALICE = "alice"
    BOB = "bob"
    EVE = "eve"


LABEL_OWNERS: Dict[str, Party] = {"A": Party.ALICE, "B": Party.BOB, "E": Party.EVE}


@dataclass
class Pair:
    """One entangled-pair instance and its measurement history."""

    index: int
    role: PairRole
    state: StateVector
    rng: RandomStream
    eve_handle: Optional[EveHandle] = None
    measured: Dict[str, Tuple[Basis, int]] = field(default_factory=dict)

    @property
    def ownership(self) -> Dict[str, Party]:
        return {label: LABEL_OWNERS[label] for label in self.state.labels}

    def measure(self, label: str, basis: Basis) -> int:
        if label not in self.state.labels:
            raise UnknownQubitError(
                "pair has no such qubit", details={"pair": self.index, "label": label}
            )
        if label in self.measured:
            raise AlreadyMeasuredError("already-measured", details={"pair": self.index, "label": label})
        bit, self.state = measure(self.state, label, basis, self.rng)
        self.measured[label] = (Basis(basis), bit)
        return bit


@dataclass
class PairBatch:
    """
    Ordered pairs shared by Alice and Bob (and possibly Eve).

    Attributes:
        pairs: Pairs in distribution order.
        attack: Source that emitted them.
        check_indices: Indices Alice announced as check pairs, ascending.
    """

    pairs: List[Pair]
    attack: AttackModel
    check_indices: List[int]
    consumed: Set[int] = field(default_factory=set)

    @property
    def roles(self) -> List[PairRole]:
        return [pair.role for pair in self.pairs]

    @property
    def message_indices(self) -> List[int]:
        return [pair.index for pair in self.pairs if pair.role == PairRole.MESSAGE]

    def count(self, role: PairRole) -> int:
        return sum(1 for pair in self.pairs if pair.role == role)

    def pair(self, index: int) -> Pair:
        if not 0 <= index < len(self.pairs):
            raise InsufficientPairsError("no such pair", details={"pair": index, "size": len(self.pairs)})
        return self.pairs[index]

    def measure(self, index: int, label: str, basis: Basis) -> int:
        """Measure one qubit; raises AlreadyMeasuredError on a repeat."""
        pair = self.pair(index)
        bit = pair.measure(label, basis)
        if label != "E":
            self.consumed.add(index)
        return bit

    def eve_handles(self, indices: List[int]) -> List[Optional[EveHandle]]:
        return [self.pairs[index].eve_handle for index in indices]


def choose_check_indices(rng: RandomStream, total: int, n_check: int) -> List[int]:
    """Alice's random choice of check pairs, drawn from her own stream."""
    return rng.fork(StreamId.ALICE).sample_indices(total, n_check)


def build_batch(
    attack: AttackModel, check_indices: List[int], total: int, rng: RandomStream
) -> PairBatch:
    """Emit `total` pairs from the source; pair p uses source lane p."""
    check_set = set(check_indices)
    pairs = []
    for index in range(total):
        lane = rng.child(index)
        state, handle = emit_pair(attack, lane)
        role = PairRole.CHECK if index in check_set else PairRole.MESSAGE
        pairs.append(Pair(index=index, role=role, state=state, rng=lane, eve_handle=handle))
    logger.debug("Built batch of %d pairs (%d check) from %s", total, len(check_set), attack.name)
    return PairBatch(pairs=pairs, attack=attack, check_indices=sorted(check_set))


def allocate_batch(
    attack: AttackModel, n_check: int, n_message: int, rng: RandomStream
) -> PairBatch:
    """
    Distribute n_check + n_message pairs; Alice picks which are check pairs.

    Raises:
        InsufficientPairsError: negative counts.
    """
    if n_check < 0 or n_message < 0:
        raise InsufficientPairsError(
            "pair counts must be non-negative", details={"n_check": n_check, "n_message": n_message}
        )
    total = n_check + n_message
    check_indices = choose_check_indices(rng, total, n_check)
    return build_batch(attack, check_indices, total, rng)
