#!/usr/bin/env python3
"""
Full-scale experiment runner
Runs every reproduction experiment through the CLI, one output folder each
"""
import signal
import subprocess
import sys
from pathlib import Path

from shapley_forest.core.config import settings

EXPERIMENTS = [
    ("exp1a", ["experiment", "--experiment", "exp1a", "--n", "3000", "--reps", "10"]),
    ("exp1a_ablation", ["ablation", "--experiment", "exp1a", "--n", "3000", "--reps", "10"]),
    ("exp1a_ksweep", ["ksweep", "--experiment", "exp1a", "--n", "3000", "--reps", "10",
                      "--k-list", "10,20,50,100,200,500"]),
    ("exp1b", ["experiment", "--experiment", "exp1b", "--n", "3000", "--reps", "10"]),
    ("exp2", ["experiment", "--experiment", "exp2", "--n", "10000", "--reps", "10"]),
    ("exp3", ["experiment", "--experiment", "exp3", "--n", "2000", "--reps", "10"]),
]


def run_experiment(name: str, argv: list, out_root: Path) -> int:
    """Run one CLI command into its own folder"""
    command = [sys.executable, "-m", "shapley_forest", *argv, "--out", str(out_root / name)]
    print(f"▶ {name}: {' '.join(argv)}")
    return subprocess.run(command).returncode


def signal_handler(sig, frame):
    print("\nStopping experiments...")
    sys.exit(0)


if __name__ == "__main__":
    signal.signal(signal.SIGINT, signal_handler)

    out_root = Path(sys.argv[1] if len(sys.argv) > 1 else settings.output_dir)
    print(f"Writing results under {out_root} with {settings.n_jobs} worker(s)")

    failed = []
    for name, argv in EXPERIMENTS:
        code = run_experiment(name, argv, out_root)
        if code != 0:
            print(f"✗ {name} exited with {code}")
            failed.append(name)

    if failed:
        print(f"\nFailed: {', '.join(failed)}")
        sys.exit(1)
    print("\n✅ All experiments finished")
