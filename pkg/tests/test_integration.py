"""
Integration Tests for the EPR direct-communication simulator

End-to-end: simulate writes JSONL, the stats aggregation reads it back and
must reproduce the numbers from the transcripts alone.
"""

import io
import json
import shutil
import tempfile
import unittest
from contextlib import redirect_stdout
from pathlib import Path

from main import main
from src.utils.logger import ActionType
from src.utils.stats_dashboard import COLUMNS, StatsDashboard, build_report, parse_lines, session_summary


class TestSimulateToStats(unittest.TestCase):
    """
    Runs the CLI into a temporary directory and checks the aggregation.
    """

    @classmethod
    def setUpClass(cls):
        cls.fixtures_dir = Path(__file__).parent / "fixtures"
        cls.workdir = Path(tempfile.mkdtemp(prefix="epr_integration_"))
        cls.log_file = str(cls.workdir / "experiment_data.json")
        cls.runs = str(cls.workdir / "runs.jsonl")
        with redirect_stdout(io.StringIO()):
            for attack in ("honest", "ghz-probe"):
                code = main([
                    "--experiment-log", cls.log_file, "simulate", "--random-bits", "8",
                    "--attack", attack, "--n-check", "4", "--trials", "40", "--seed", "11",
                    "--output", str(cls.workdir / f"{attack}.jsonl"),
                ])
                assert code == 0
        with open(cls.runs, "w", encoding="utf-8") as merged:
            for attack in ("honest", "ghz-probe"):
                merged.write((cls.workdir / f"{attack}.jsonl").read_text(encoding="utf-8"))

    @classmethod
    def tearDownClass(cls):
        if cls.workdir.exists():
            shutil.rmtree(cls.workdir)

    def test_stats_rows_match_transcripts(self):
        report = build_report(self.runs)
        self.assertEqual(report.malformed, [])
        self.assertEqual(list(report.table.columns), COLUMNS)
        rows = {row.attack: row for row in report.table.itertuples()}
        self.assertEqual(set(rows), {"honest", "ghz-probe"})

        honest = rows["honest"]
        self.assertEqual(honest.sessions, 40)
        self.assertEqual(honest.aborts, 0)
        self.assertEqual(honest.bob_ber, 0.0)

        with open(self.workdir / "ghz-probe.jsonl", "r", encoding="utf-8") as f:
            records = [json.loads(line) for line in f]
        probe = rows["ghz-probe"]
        self.assertEqual(probe.aborts, sum(record["verdict"] == "Abort" for record in records))
        self.assertLessEqual(probe.ci_low, probe.detection_rate)
        self.assertGreaterEqual(probe.ci_high, probe.detection_rate)
        if probe.aborts < probe.sessions:
            self.assertEqual(probe.eve_correct, 1.0)

    def test_session_summary(self):
        with open(self.workdir / "honest.jsonl", "r", encoding="utf-8") as f:
            transcripts, malformed = parse_lines(f)
        summary = session_summary(transcripts)
        self.assertEqual(malformed, [])
        self.assertEqual(summary["passed"], 40)
        self.assertEqual(summary["message_bits"], 320)
        self.assertEqual(summary["classical_bits_per_secret_bit"], 1.0)
        self.assertEqual(summary["teleportation_bits_per_secret_bit"], 2.0)
        self.assertIsNone(summary["eve_correct_fraction"])

    def test_experiment_log_structure(self):
        with open(self.log_file, "r", encoding="utf-8") as f:
            data = json.load(f)
        self.assertIsInstance(data, list, "Log data should be a list")
        self.assertEqual(len(data), 2)
        for entry in data:
            for field in ("id", "timestamp", "role", "action", "details", "status"):
                self.assertIn(field, entry, f"Log entry should have '{field}' field")
            self.assertEqual(entry["action"], ActionType.SIMULATE.value)
            self.assertEqual(entry["details"]["seed"], 11)


class TestStatsFixtures(unittest.TestCase):

    fixtures_dir = Path(__file__).parent / "fixtures"

    def report(self, name: str):
        return build_report(str(self.fixtures_dir / name))

    def test_honest_fixture(self):
        (row,) = self.report("honest_only.jsonl").table.to_dict("records")
        self.assertEqual((row["attack"], row["n_check"], row["sessions"], row["aborts"]), ("honest", 16, 3, 0))
        self.assertEqual(row["bob_ber"], 0.0)
        self.assertEqual(row["eve_mi"], 0.0)

    def test_probe_fixture(self):
        rows = self.report("ghz_pass.jsonl").table.to_dict("records")
        unguarded, guarded = rows
        self.assertEqual(unguarded["n_check"], 0)
        self.assertEqual(unguarded["eve_correct"], 1.0)
        self.assertAlmostEqual(unguarded["eve_mi"], 1.0)
        self.assertEqual(guarded["n_check"], 4)
        self.assertEqual(guarded["detection_rate"], 1.0)

    def test_malformed_lines_are_reported(self):
        report = self.report("malformed.jsonl")
        self.assertEqual([bad.line_number for bad in report.malformed], [2, 4])
        self.assertIn("verdict", report.malformed[1].reason)
        self.assertEqual(report.sessions, 2)

    def test_empty_file(self):
        report = self.report("empty.jsonl")
        self.assertTrue(report.table.empty)
        self.assertEqual(report.sessions, 0)

    def test_dashboard_prints(self):
        out = io.StringIO()
        with redirect_stdout(out):
            StatsDashboard(str(self.fixtures_dir / "malformed.jsonl"), color=False).print_dashboard()
        self.assertIn("EPR SESSION STATISTICS", out.getvalue())
        self.assertIn("line 2", out.getvalue())


if __name__ == "__main__":
    unittest.main()
