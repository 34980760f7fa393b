"""
Security Module
===============
Channel verification (random Z/X check rounds), Monte-Carlo detection
statistics and the exact enumeration oracle they are checked against.
"""

from src.security.channel_test import (
    CheckRound,
    TestVerdict,
    Verdict,
    draw_basis,
    draw_bases,
    evaluate_rounds,
    run_channel_test,
    run_check_round,
    split_kept_rounds,
)
from src.security.detection import (
    DetectionStats,
    estimate_detection,
    estimate_survival,
    wilson_interval,
)
from src.security.oracle import (
    bob_error_probability,
    eve_correct_probability,
    expected_pair_survival,
    expected_survival,
    joint_distribution,
    kept_mismatch_probability,
    mismatch_probability,
)

__all__ = [
    "CheckRound",
    "DetectionStats",
    "TestVerdict",
    "Verdict",
    "bob_error_probability",
    "draw_basis",
    "draw_bases",
    "estimate_detection",
    "estimate_survival",
    "eve_correct_probability",
    "evaluate_rounds",
    "expected_pair_survival",
    "expected_survival",
    "joint_distribution",
    "kept_mismatch_probability",
    "mismatch_probability",
    "run_channel_test",
    "run_check_round",
    "split_kept_rounds",
    "wilson_interval",
]
