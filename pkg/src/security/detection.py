# src/security/detection.py
"""
Monte-Carlo detection statistics.

estimate_detection()  - how often a channel test with n_check check pairs aborts
estimate_survival()   - how often an attack survives exactly n compared rounds

Every trial runs on its own derived seed, so trials are independent of each
other and of the order they are executed in.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Tuple

from scipy.stats import binomtest

from src.adversary.attacks import AttackModel, emit_pair
from src.protocol.pairs import Pair, PairRole, allocate_batch
from src.quantum.rng import RandomStream, StreamId, derive_seed
from src.security.channel_test import draw_basis, run_channel_test, run_check_round

# Configure module logger
logger = logging.getLogger(__name__)

CONFIDENCE_LEVEL = 0.95


def wilson_interval(successes: int, trials: int, confidence: float = CONFIDENCE_LEVEL) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion; (0, 1) when trials is 0."""
    if trials <= 0:
        return 0.0, 1.0
    interval = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    rate = successes / trials
    return max(0.0, min(float(interval.low), rate)), min(1.0, max(float(interval.high), rate))


@dataclass(frozen=True)
class DetectionStats:
    """
    Aggregated detection results.

    Attributes:
        attack: Attack name as given on the CLI.
        n_check: Check pairs per trial (count_mode "pairs") or compared rounds
            per trial (count_mode "kept").
        trials: Number of independent channel tests.
        detected: Trials that ended in Abort.
        rate: detected / trials.
        ci_low, ci_high: 95% Wilson interval of rate.
        per_round_rate: Mismatches over pooled kept rounds.
        kept_rounds: Pooled kept rounds.
    """

    attack: str
    n_check: int
    trials: int
    detected: int
    rate: float
    ci_low: float
    ci_high: float
    per_round_rate: float
    kept_rounds: int
    mismatches: int = 0
    count_mode: str = "pairs"

    @property
    def survival(self) -> float:
        return 1.0 - self.rate

    def to_record(self) -> Dict[str, Any]:
        return asdict(self)


def _summarize(
    attack: AttackModel, n_check: int, trials: int, detected: int, kept: int, mismatches: int, mode: str
) -> DetectionStats:
    ci_low, ci_high = wilson_interval(detected, trials)
    stats = DetectionStats(
        attack=attack.name,
        n_check=n_check,
        trials=trials,
        detected=detected,
        rate=detected / trials,
        ci_low=ci_low,
        ci_high=ci_high,
        per_round_rate=(mismatches / kept) if kept else 0.0,
        kept_rounds=kept,
        mismatches=mismatches,
        count_mode=mode,
    )
    logger.info(
        "%s n=%d (%s): detected %d/%d, per-round %.4f over %d kept rounds",
        attack.name, n_check, mode, detected, trials, stats.per_round_rate, kept,
    )
    return stats


def estimate_detection(attack: AttackModel, n_check: int, trials: int, rng: RandomStream) -> DetectionStats:
    """
    Run `trials` independent channel tests of n_check check pairs each.

    Raises:
        ValueError: trials < 1.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    detected = kept = mismatches = 0
    for trial in range(trials):
        trial_rng = RandomStream(derive_seed(rng.seed, trial))
        batch = allocate_batch(attack, n_check, 0, trial_rng)
        verdict = run_channel_test(batch, n_check, trial_rng)
        detected += 0 if verdict.passed else 1
        kept += verdict.kept_count
        mismatches += verdict.mismatch_count
    return _summarize(attack, n_check, trials, detected, kept, mismatches, "pairs")


def estimate_survival(attack: AttackModel, kept_rounds: int, trials: int, rng: RandomStream) -> DetectionStats:
    """
    Run `trials` tests that each continue until exactly `kept_rounds`
    same-basis rounds have been compared. The Pass frequency estimates
    (1 - p)^kept_rounds for per-round detection probability p.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if kept_rounds < 0:
        raise ValueError(f"kept_rounds must be >= 0, got {kept_rounds}")
    detected = kept_total = mismatches = 0
    for trial in range(trials):
        trial_rng = RandomStream(derive_seed(rng.seed, trial))
        alice, bob = trial_rng.fork(StreamId.ALICE), trial_rng.fork(StreamId.BOB)
        kept = trial_mismatches = index = 0
        while kept < kept_rounds:
            lane = trial_rng.child(index)
            state, handle = emit_pair(attack, lane)
            pair = Pair(index=index, role=PairRole.CHECK, state=state, rng=lane, eve_handle=handle)
            check = run_check_round(pair, draw_basis(alice), draw_basis(bob))
            kept += 1 if check.kept else 0
            trial_mismatches += 1 if check.mismatch else 0
            index += 1
        detected += 1 if trial_mismatches else 0
        kept_total += kept
        mismatches += trial_mismatches
    return _summarize(attack, kept_rounds, trials, detected, kept_total, mismatches, "kept")
