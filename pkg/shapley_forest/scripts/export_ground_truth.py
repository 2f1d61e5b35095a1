"""
Export the theoretical Shapley effects of every experiment with a closed form
Run with: python -m shapley_forest.scripts.export_ground_truth [out_dir]
"""
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from shapley_forest.core.exceptions import ShapleyForestError
from shapley_forest.crud.reports import write_effects
from shapley_forest.schemas.generator import Experiment, GeneratorSpec
from shapley_forest.services.ground_truth import ground_truth_for

EXPERIMENTS = (Experiment.EXP1A, Experiment.EXP1B, Experiment.EXP2)


def export_ground_truth(out_dir: str = "results/ground_truth"):
    """Write one truth CSV per experiment with default parameters"""
    for experiment in EXPERIMENTS:
        spec = GeneratorSpec(experiment=experiment, n=1)
        try:
            truth = ground_truth_for(spec)
        except ShapleyForestError as e:
            print(f"✗ {experiment.value}: {e.detail}")
            raise
        path = write_effects(truth, Path(out_dir) / f"{experiment.value}.csv")
        print(f"✓ {experiment.value}: p={len(truth)}, sum={truth.sum():.6f} -> {path}")

    print(f"\n✅ Ground truth exported to {out_dir}")


if __name__ == "__main__":
    export_ground_truth(*sys.argv[1:2])
