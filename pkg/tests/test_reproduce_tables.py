"""
Tests for the batch reproduction driver.
"""

import json
import sys

import pytest

from adaptive_pinn.utils.file_utils import atomic_write_text, run_digest
from scripts import reproduce_tables


def fake_command(argv):
    """Write one report into the step's output directory and succeed."""
    out = argv[argv.index("--output-dir") + 1]
    atomic_write_text(f"{out}/report.csv", f"{argv[0]}\n")
    return 0


class TestBuildSteps:
    """Test the step table."""

    def test_every_step_has_its_own_directory(self, tmp_path):
        """Test seeds, output directories and the trial override."""
        steps = reproduce_tables.build_steps(tmp_path, seed=7, trials=12, jobs=3)
        assert [s["name"] for s in steps] == ["data", "benchmark", "robustness", "pinn", "stats"]
        for step in steps:
            assert step["argv"][step["argv"].index("--seed") + 1] == "7"
            assert step["out"] == tmp_path / step["name"]
        robustness = steps[2]["argv"]
        assert robustness[robustness.index("--trials") + 1] == "12"
        assert robustness[robustness.index("--jobs") + 1] == "3"


class TestRunSteps:
    """Test step execution and the summary."""

    def test_digests_of_successful_steps(self, tmp_path, monkeypatch):
        """Test that each successful step records the digest of its directory."""
        monkeypatch.setattr(reproduce_tables, "run_command", fake_command)
        steps = reproduce_tables.build_steps(tmp_path, seed=0)
        results = reproduce_tables.run_steps(steps)
        assert results["succeeded"] == 5
        for step, entry in zip(steps, results["steps"]):
            assert entry["files"] == run_digest(step["out"])
            assert list(entry["files"]) == ["report.csv"]

    def test_stops_after_failure(self, tmp_path, monkeypatch):
        """Test that a failing step ends the run unless asked to keep going."""
        monkeypatch.setattr(reproduce_tables, "run_command", lambda argv: 3)
        steps = reproduce_tables.build_steps(tmp_path, seed=0)
        assert len(reproduce_tables.run_steps(steps)["steps"]) == 1
        assert len(reproduce_tables.run_steps(steps, keep_going=True)["steps"]) == 5

    def test_summary_written_atomically_with_sorted_keys(self, tmp_path, monkeypatch):
        """Test that summary.json is complete, key-sorted and leaves no temp file."""
        monkeypatch.setattr(reproduce_tables, "run_command", fake_command)
        monkeypatch.setattr(sys, "argv", ["reproduce_tables.py", "--output-dir", str(tmp_path)])
        with pytest.raises(SystemExit) as exit_info:
            reproduce_tables.main()
        assert exit_info.value.code == 0

        text = (tmp_path / "summary.json").read_text()
        summary = json.loads(text)
        assert text == json.dumps(summary, indent=2, sort_keys=True) + "\n"
        assert summary["failed"] == 0
        assert not [p for p in tmp_path.iterdir() if p.name.startswith(".summary.json")]
