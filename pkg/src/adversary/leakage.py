# src/adversary/leakage.py
"""
How much of the message reached Eve, and what it cost Bob.

Results are split by verdict. Aborted sessions never carry an announcement,
so their message-phase numbers are empty by construction.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.adversary.attacks import AttackModel
from src.protocol.transcript import Transcript
from src.security.channel_test import Verdict

# Configure module logger
logger = logging.getLogger(__name__)


def empirical_mutual_information(x: Sequence[int], y: Sequence[int]) -> float:
    """Plug-in estimate of I(X; Y) in bits for two aligned 0/1 samples."""
    if len(x) != len(y):
        raise ValueError(f"samples differ in length: {len(x)} vs {len(y)}")
    if len(x) == 0:
        return 0.0
    joint = np.zeros((2, 2), dtype=float)
    np.add.at(joint, (np.asarray(x, dtype=int), np.asarray(y, dtype=int)), 1.0)
    joint /= joint.sum()
    marginal = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    mask = joint > 0
    return float(np.sum(joint[mask] * np.log2(joint[mask] / marginal[mask])))


@dataclass(frozen=True)
class VerdictLeakage:
    """Leakage numbers for the sessions sharing one verdict."""

    verdict: str
    sessions: int
    message_bits: int
    eve_correct_fraction: Optional[float]
    eve_mutual_information: Optional[float]
    bob_error_rate: Optional[float]


@dataclass(frozen=True)
class LeakageStats:
    attack: str
    by_verdict: Dict[str, VerdictLeakage]

    def to_record(self) -> Dict[str, Any]:
        return {"attack": self.attack, "by_verdict": {key: asdict(value) for key, value in self.by_verdict.items()}}


def _summarize(model: AttackModel, verdict: Verdict, sessions: List[Transcript]) -> VerdictLeakage:
    delivered = [session for session in sessions if session.passed]
    message = [bit for session in delivered for bit in session.message]
    decoded = [bit for session in delivered for bit in session.decoded]
    bits = len(message)

    bob_error_rate = None
    if verdict == Verdict.PASS:
        bob_error_rate = (sum(m != d for m, d in zip(message, decoded)) / bits) if bits else 0.0

    eve_correct = eve_mi = None
    if not model.has_eve:
        eve_mi = 0.0
    else:
        observed = [session for session in delivered if session.eve_guess is not None]
        secret = [bit for session in observed for bit in session.message]
        guess = [bit for session in observed for bit in session.eve_guess]
        if secret:
            eve_correct = sum(s == g for s, g in zip(secret, guess)) / len(secret)
            eve_mi = empirical_mutual_information(guess, secret)
        elif verdict == Verdict.ABORT:
            eve_mi = 0.0

    return VerdictLeakage(
        verdict=verdict.value,
        sessions=len(sessions),
        message_bits=bits,
        eve_correct_fraction=eve_correct,
        eve_mutual_information=eve_mi,
        bob_error_rate=bob_error_rate,
    )


def leakage_report(model: AttackModel, sessions: Sequence[Transcript]) -> LeakageStats:
    """
    Eve's correct fraction, I(guess; message) per bit and Bob's bit-error
    rate, split by verdict. Sessions run against other attacks are ignored.

    Raises:
        ValueError: no session for this attack.
    """
    matching = [session for session in sessions if session.attack == model]
    if not matching:
        raise ValueError(f"no sessions for attack {model.name}")
    by_verdict = {}
    for verdict in Verdict:
        group = [session for session in matching if session.verdict == verdict]
        if group:
            by_verdict[verdict.value] = _summarize(model, verdict, group)
    logger.info("Leakage report for %s over %d sessions", model.name, len(matching))
    return LeakageStats(attack=model.name, by_verdict=by_verdict)
