import argparse
import logging
from pathlib import Path
from typing import Any, Dict

from shapley_forest.cli.options import add_data_flags, add_forest_flags, build_config, generator_spec
from shapley_forest.core.exceptions import GroundTruthError
from shapley_forest.crud.datasets import write_csv, write_generator_spec
from shapley_forest.crud.forests import save_forest
from shapley_forest.crud.reports import write_effects
from shapley_forest.schemas.run import Command
from shapley_forest.services import datasets as dataset_service
from shapley_forest.services import forest as forest_service
from shapley_forest.services.ground_truth import ground_truth_for
from shapley_forest.services.harness import prepare_repetition

logger = logging.getLogger(__name__)


def cmd_fit(args: argparse.Namespace) -> Dict[str, Any]:
    """Fit the forest of repetition 0 and save it"""
    config = build_config(args, Command.FIT)
    repetition = prepare_repetition(config, 0, {"fit": 0.0})
    path = save_forest(repetition.forest, Path(config.output_dir) / "forest.json")
    diagnostics = forest_service.diagnostics(repetition.forest, repetition.dataset)
    return {"oob_explained_variance": diagnostics["oob_explained_variance"], "forest": str(path)}


def cmd_generate(args: argparse.Namespace) -> Dict[str, Any]:
    spec = generator_spec(args)
    dataset = dataset_service.generate(spec)
    out = Path(args.out or "data")
    data_path = write_csv(dataset, out / f"{spec.experiment.value}.csv")
    spec_path = write_generator_spec(spec, out / f"{spec.experiment.value}.json")
    return {"n": dataset.n, "p": dataset.p, "data": str(data_path), "spec": str(spec_path)}


def cmd_truth(args: argparse.Namespace) -> Dict[str, Any]:
    spec = generator_spec(args)
    truth = ground_truth_for(spec)
    if truth is None:
        raise GroundTruthError(f"no closed-form effects for {spec.experiment.value}")
    path = write_effects(truth, Path(args.out or "data") / f"{spec.experiment.value}_truth.csv")
    return {"sum": float(truth.sum()), "truth": str(path)}


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(Command.FIT.value, help="fit a forest and save it as JSON")
    add_data_flags(parser)
    add_forest_flags(parser)
    parser.set_defaults(func=cmd_fit)

    for name, handler, help_text in (
        ("generate", cmd_generate, "write a generated sample and its spec"),
        ("truth", cmd_truth, "write the theoretical effects of a generated experiment"),
    ):
        parser = subparsers.add_parser(name, help=help_text)
        add_data_flags(parser)
        parser.set_defaults(func=handler)
