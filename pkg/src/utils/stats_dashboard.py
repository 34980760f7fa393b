# src/utils/stats_dashboard.py
"""
Stats Dashboard for JSONL transcripts

Reads the transcripts written by `simulate` (one JSON object per line) and
summarizes them per (attack, n_check): detection rate with its Wilson
interval, Bob's bit-error rate and Eve's correct fraction and mutual
information on delivered messages. Every number is recomputed from the
JSONL, nothing else is consulted.

Usage:
    python main.py stats --input runs.jsonl
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

import pandas as pd
from colorama import Fore, Style

from src.adversary.leakage import leakage_report
from src.errors import EprError
from src.protocol.bits import bit_errors
from src.protocol.transcript import TELEPORTATION_BITS_PER_SECRET_BIT, Transcript
from src.security.channel_test import Verdict
from src.security.detection import wilson_interval

# Configure module logger
logger = logging.getLogger(__name__)

COLUMNS = [
    "attack", "n_check", "sessions", "aborts", "detection_rate", "ci_low", "ci_high",
    "bob_ber", "eve_correct", "eve_mi",
]


@dataclass(frozen=True)
class MalformedLine:
    line_number: int
    reason: str


@dataclass
class StatsReport:
    """Aggregated table plus the lines that could not be read."""

    table: pd.DataFrame
    malformed: List[MalformedLine] = field(default_factory=list)

    @property
    def sessions(self) -> int:
        return int(self.table["sessions"].sum()) if len(self.table) else 0


def parse_lines(lines: Iterable[str]) -> tuple:
    """
    Parse JSONL; bad lines are collected, not raised.

    Returns:
        (transcripts, malformed) with 1-based line numbers.
    """
    transcripts: List[Transcript] = []
    malformed: List[MalformedLine] = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("not a JSON object")
            transcript = Transcript.from_record(record)
            transcript.check_invariants()
            if transcript.passed and len(transcript.decoded) != len(transcript.message):
                raise ValueError("decoded length differs from the message length")
            if transcript.eve_guess is not None and len(transcript.eve_guess) != len(transcript.message):
                raise ValueError("eve_guess length differs from the message length")
            transcripts.append(transcript)
        except (EprError, ValueError, KeyError, TypeError) as e:
            reason = f"missing field {e}" if isinstance(e, KeyError) else str(e)
            logger.warning("Skipping malformed line %d: %s", number, reason)
            malformed.append(MalformedLine(number, reason))
    return transcripts, malformed


def summarize(transcripts: List[Transcript]) -> pd.DataFrame:
    """One row per (attack, n_check), sorted by both."""
    if not transcripts:
        return pd.DataFrame(columns=COLUMNS)

    index = pd.DataFrame({
        "attack": [transcript.attack.name for transcript in transcripts],
        "n_check": [transcript.n_check for transcript in transcripts],
        "aborted": [int(not transcript.passed) for transcript in transcripts],
    })
    rows = []
    for (attack, n_check), group in index.groupby(["attack", "n_check"], sort=True):
        members = [transcripts[position] for position in group.index]
        aborts = int(group["aborted"].sum())
        low, high = wilson_interval(aborts, len(members))
        delivered = leakage_report(members[0].attack, members).by_verdict.get(Verdict.PASS.value)
        rows.append({
            "attack": attack,
            "n_check": int(n_check),
            "sessions": len(members),
            "aborts": aborts,
            "detection_rate": aborts / len(members),
            "ci_low": low,
            "ci_high": high,
            "bob_ber": delivered.bob_error_rate if delivered else None,
            "eve_correct": delivered.eve_correct_fraction if delivered else None,
            "eve_mi": delivered.eve_mutual_information if delivered else None,
        })
    return pd.DataFrame(rows, columns=COLUMNS)


def session_summary(transcripts: List[Transcript]) -> Dict[str, Any]:
    """
    Headline numbers for a `simulate` run.

    Bob's error rate, Eve's correct fraction and the classical cost are
    taken over delivered (Pass) sessions only; None where nothing was
    delivered.
    """
    delivered = [transcript for transcript in transcripts if transcript.passed]
    message_bits = sum(len(transcript.message) for transcript in delivered)
    classical_bits = sum(transcript.classical_bits_sent for transcript in delivered)
    bob_errors = sum(transcript.bob_errors for transcript in delivered)
    observed = [transcript for transcript in delivered if transcript.eve_guess is not None]
    eve_bits = sum(len(transcript.message) for transcript in observed)
    eve_correct = sum(
        len(transcript.message) - bit_errors(transcript.message, transcript.eve_guess) for transcript in observed
    )
    return {
        "sessions": len(transcripts),
        "passed": len(delivered),
        "pass_rate": len(delivered) / len(transcripts) if transcripts else None,
        "message_bits": message_bits,
        "bob_error_rate": bob_errors / message_bits if message_bits else None,
        "eve_correct_fraction": eve_correct / eve_bits if eve_bits else None,
        "classical_bits_per_secret_bit": classical_bits / message_bits if message_bits else None,
        "teleportation_bits_per_secret_bit": TELEPORTATION_BITS_PER_SECRET_BIT,
    }


def build_report(path: str) -> StatsReport:
    """Read a JSONL file and aggregate it."""
    with open(path, "r", encoding="utf-8") as f:
        transcripts, malformed = parse_lines(f)
    logger.info("Read %d transcripts from %s (%d malformed lines)", len(transcripts), path, len(malformed))
    return StatsReport(table=summarize(transcripts), malformed=malformed)


def _fmt(value: Optional[float]) -> str:
    if value is None or pd.isna(value):
        return "-"
    return f"{value:.4f}"


def render_table(table: pd.DataFrame, color: bool = True) -> str:
    """Human-readable table; detection rates above zero are highlighted."""
    if table.empty:
        return "(no transcripts)"
    shown = table.copy()
    for column in ("detection_rate", "ci_low", "ci_high", "bob_ber", "eve_correct", "eve_mi"):
        shown[column] = shown[column].map(_fmt)
    text = shown.to_string(index=False)
    if not color:
        return text
    header, *body = text.splitlines()
    painted = [Style.BRIGHT + header + Style.RESET_ALL]
    for line, rate in zip(body, table["detection_rate"]):
        tint = Fore.RED if rate > 0 else Fore.GREEN
        painted.append(tint + line + Style.RESET_ALL)
    return "\n".join(painted)


class StatsDashboard:
    """
    Prints the stats table for a transcript file.
    """

    def __init__(self, path: str, color: bool = True) -> None:
        self.path = path
        self.color = color
        self.report = build_report(path)

    def print_dashboard(self) -> None:
        print("\n" + "=" * 70)
        print("📊 EPR SESSION STATISTICS")
        print("=" * 70)
        print(f"Input: {self.path}  ({self.report.sessions} sessions)\n")
        print(render_table(self.report.table, color=self.color))
        if self.report.malformed:
            print(f"\n⚠️  {len(self.report.malformed)} malformed line(s):")
            for bad in self.report.malformed:
                print(f"  • line {bad.line_number}: {bad.reason}")
        print()
