#!/usr/bin/env python3
"""
Batch driver: run the benchmark, robustness and statistics commands in sequence
and collect their output directories under one root.
"""

import argparse
import sys
from datetime import datetime
from pathlib import Path
from typing import Dict, List

# Add the project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from loguru import logger
from adaptive_pinn.main import main as run_command
from adaptive_pinn.utils.file_utils import run_digest, write_json

STEPS = [
    ("data", ["gen-data"]),
    ("benchmark", ["benchmark", "--preset", "paper-shape", "--models", "TL-NN,NN,PINN,GP,SVR-RS,SVR-Bayesian"]),
    ("robustness", ["mc-validate", "--preset", "paper-trials"]),
    ("pinn", ["train", "--preset", "paper-pinn"]),
]


def build_steps(root: Path, seed: int, trials: int = None, jobs: int = 1) -> List[Dict]:
    """
    Expand the step table into concrete argument vectors.

    Args:
        root: Output root; each step writes to its own subdirectory
        seed: Root seed shared by every step
        trials: Override for the Monte Carlo trial count
        jobs: Worker threads for the robustness step

    Returns:
        List of {"name", "argv", "out"} dictionaries
    """
    steps = []
    for name, argv in STEPS:
        argv = [*argv, "--seed", str(seed), "--output-dir", str(root / name)]
        if name == "robustness":
            argv += ["--jobs", str(jobs)]
            if trials is not None:
                argv += ["--trials", str(trials)]
        steps.append({"name": name, "argv": argv, "out": root / name})

    # The U-test compares the two generated domains.
    steps.append({
        "name": "stats",
        "argv": [
            "stats",
            "--source", str(root / "data" / "water.csv"),
            "--target", str(root / "data" / "sodium.csv"),
            "--train-report", str(root / "pinn" / "train.csv"),
            "--seed", str(seed),
            "--output-dir", str(root / "stats"),
        ],
        "out": root / "stats",
    })
    return steps


def run_steps(steps: List[Dict], keep_going: bool = False) -> Dict:
    """
    Run each step through the command-line entry point.

    Args:
        steps: Output of ``build_steps``
        keep_going: Continue after a failing step

    Returns:
        Summary dictionary with per-step exit codes and SHA-256 digests of
        the files each successful step wrote
    """
    results = {"total_steps": len(steps), "succeeded": 0, "failed": 0, "steps": []}
    start_time = datetime.now()

    for i, step in enumerate(steps, 1):
        logger.info(f"Step {i}/{len(steps)}: {step['name']}")
        step_start = datetime.now()
        code = run_command(step["argv"])
        elapsed = (datetime.now() - step_start).total_seconds()

        entry = {"name": step["name"], "exit_code": code, "seconds": elapsed}
        results["steps"].append(entry)
        if code == 0:
            results["succeeded"] += 1
            entry["files"] = run_digest(step["out"])
        else:
            results["failed"] += 1
            logger.error(f"Step {step['name']} exited with {code}")
            if not keep_going:
                break

    results["seconds"] = (datetime.now() - start_time).total_seconds()
    return results


def main():
    """Main function."""
    parser = argparse.ArgumentParser(description="Regenerate the benchmark and robustness tables")
    parser.add_argument("--output-dir", default="./runs/tables", help="Output root")
    parser.add_argument("--seed", type=int, default=0, help="Root seed")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials (preset value when omitted)")
    parser.add_argument("--jobs", type=int, default=1, help="Worker threads for the robustness study")
    parser.add_argument("--keep-going", action="store_true", help="Continue after a failing step")

    args = parser.parse_args()
    root = Path(args.output_dir)
    root.mkdir(parents=True, exist_ok=True)

    results = run_steps(build_steps(root, args.seed, args.trials, args.jobs), args.keep_going)

    summary_file = write_json(root / "summary.json", results)

    print(f"\nSteps: {results['succeeded']}/{results['total_steps']} succeeded")
    print(f"Total time: {results['seconds']:.1f}s")
    print(f"Summary saved to: {summary_file}")

    sys.exit(0 if results["failed"] == 0 else 1)


if __name__ == "__main__":
    main()
