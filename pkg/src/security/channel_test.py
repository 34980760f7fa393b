# src/security/channel_test.py
"""
Channel verification.

For every check pair Alice and Bob each draw Z or X uniformly from their own
stream, measure their qubit, and only then publish basis and outcome. Rounds
with different bases are discarded (but kept in the record); a single
mismatch among the same-basis rounds aborts the session.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

from src.errors import InsufficientPairsError
from src.protocol.pairs import Pair, PairBatch
from src.quantum.rng import RandomStream, StreamId
from src.quantum.state import Basis

# Configure module logger
logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    PASS = "Pass"
    ABORT = "Abort"


@dataclass(frozen=True)
class CheckRound:
    """One sacrificed pair, after both parties published."""

    pair_index: int
    basis_a: Basis
    basis_b: Basis
    outcome_a: int
    outcome_b: int

    @property
    def kept(self) -> bool:
        return self.basis_a == self.basis_b

    @property
    def mismatch(self) -> bool:
        return self.kept and self.outcome_a != self.outcome_b


@dataclass
class TestVerdict:
    """Result of one channel test: Abort iff some kept round mismatched."""

    __test__ = False

    verdict: Verdict
    rounds: List[CheckRound] = field(default_factory=list)

    @property
    def kept_count(self) -> int:
        return sum(1 for check in self.rounds if check.kept)

    @property
    def mismatch_count(self) -> int:
        return sum(1 for check in self.rounds if check.mismatch)

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS


def draw_basis(rng: RandomStream) -> Basis:
    return Basis.X if rng.bit() else Basis.Z


def draw_bases(rng: RandomStream, count: int) -> List[Basis]:
    return [draw_basis(rng) for _ in range(count)]


def run_check_round(pair: Pair, basis_a: Basis, basis_b: Basis) -> CheckRound:
    """Both parties measure (A before B) and commit before comparing."""
    outcome_a = pair.measure("A", basis_a)
    outcome_b = pair.measure("B", basis_b)
    return CheckRound(pair.index, basis_a, basis_b, outcome_a, outcome_b)


def evaluate_rounds(rounds: List[CheckRound]) -> TestVerdict:
    """Compare published rounds; log the discarded ones."""
    for check in rounds:
        if not check.kept:
            logger.debug(
                "Discarded check pair %d (bases %s/%s)",
                check.pair_index, check.basis_a.value, check.basis_b.value,
            )
    verdict = Verdict.ABORT if any(check.mismatch for check in rounds) else Verdict.PASS
    result = TestVerdict(verdict=verdict, rounds=list(rounds))
    logger.debug(
        "Channel test: %d rounds, %d kept, %d mismatches -> %s",
        len(rounds), result.kept_count, result.mismatch_count, verdict.value,
    )
    return result


def run_channel_test(batch: PairBatch, n_check: int, rng: RandomStream) -> TestVerdict:
    """
    Verify the channel on the first n_check check pairs of the batch.

    Args:
        batch: Distributed pairs with Alice's announced check indices.
        n_check: Number of check pairs to sacrifice.
        rng: Session root stream; Alice and Bob use its ALICE and BOB forks.

    Raises:
        InsufficientPairsError: fewer than n_check check pairs in the batch.
    """
    if n_check < 0 or len(batch.check_indices) < n_check:
        raise InsufficientPairsError(
            "not enough check pairs",
            details={"requested": n_check, "available": len(batch.check_indices)},
        )
    alice, bob = rng.fork(StreamId.ALICE), rng.fork(StreamId.BOB)
    rounds = []
    for index in batch.check_indices[:n_check]:
        basis_a, basis_b = draw_basis(alice), draw_basis(bob)
        rounds.append(run_check_round(batch.pair(index), basis_a, basis_b))
    return evaluate_rounds(rounds)


def split_kept_rounds(rounds: List[CheckRound]) -> Tuple[List[CheckRound], List[CheckRound]]:
    """Kept rounds split into (Z-Z, X-X)."""
    kept = [check for check in rounds if check.kept]
    return (
        [check for check in kept if check.basis_a == Basis.Z],
        [check for check in kept if check.basis_a == Basis.X],
    )
