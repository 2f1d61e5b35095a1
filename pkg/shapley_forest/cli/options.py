import argparse
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from shapley_forest.core.config import settings
from shapley_forest.core.exceptions import ConfigError
from shapley_forest.crud.datasets import read_generator_spec
from shapley_forest.schemas.forest import ForestParams
from shapley_forest.schemas.generator import Experiment, GeneratorSpec
from shapley_forest.schemas.run import Command, RunConfig, Sampler, Strategy

DEFAULT_N = {
    Experiment.EXP1A: 3000,
    Experiment.EXP1B: 3000,
    Experiment.EXP2: 10000,
    Experiment.EXP3: 2000,
    Experiment.CUSTOM: 1000,
}


def add_data_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("data")
    group.add_argument("--config", help="RunConfig JSON file; explicit flags override it")
    group.add_argument("--data", help="CSV file with a header row")
    group.add_argument("--schema", help="feature columns in header order: c or cat:a|b|c, comma separated")
    group.add_argument("--target", help="name of the output column")
    group.add_argument("--experiment", choices=[e.value for e in Experiment], help="generated experiment")
    group.add_argument("--generator", help="GeneratorSpec JSON file")
    group.add_argument("--n", type=int, help="sample size of a generated experiment")
    group.add_argument("--noise", type=float, help="noise fraction of V[Y] for a generated experiment")
    group.add_argument("--seed", type=int, help="run seed (default 0)")
    group.add_argument("--out", help=f"output directory (default {settings.output_dir})")
    group.add_argument("--n-jobs", type=int, help=f"worker processes (default {settings.n_jobs})")


def add_forest_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("forest")
    group.add_argument("--trees", type=int, help=f"number of trees (default {settings.num_trees})")
    group.add_argument("--mtry", type=int, help="candidate variables per split (default ceil(p/3))")
    group.add_argument("--min-node-size", type=int, help=f"minimum node size (default {settings.min_node_size})")
    group.add_argument("--max-depth", type=int)
    group.add_argument("--max-leaves", type=int)
    group.add_argument("--theory-mode", action="store_true", help="subsampling, gamma-balanced splits, random mtry=1")
    group.add_argument("--subsample", type=int, help="subsample size in theory mode (default 0.632 n)")
    group.add_argument("--gamma", type=float)
    group.add_argument("--delta", type=float)
    group.add_argument("--forest", help="saved forest JSON to reuse instead of fitting")


def add_estimation_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("estimation")
    group.add_argument("--subsets", type=int, help=f"number K of drawn subsets (default {settings.num_subsets})")
    group.add_argument("--sampler", choices=[s.value for s in Sampler])
    group.add_argument("--estimator", choices=[s.value for s in Strategy])
    group.add_argument("--marginal-draws", type=int)
    group.add_argument("--reps", type=int, help="repetitions (default 1)")
    group.add_argument("--no-cache", action="store_true", help="recompute every subset value")
    group.add_argument("--no-plot", action="store_true")
    group.add_argument("--strict", action="store_true", help="keep effects inside [0, 1]")


def _read_json(path: str) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", {"path": path})
    except json.JSONDecodeError as e:
        raise ConfigError(f"could not parse {path}: {e}", {"path": path})


def _given(args: argparse.Namespace, name: str) -> bool:
    return getattr(args, name, None) is not None


def generator_from_args(args: argparse.Namespace, base: Dict[str, Any]) -> Dict[str, Any]:
    """GeneratorSpec fields from --generator, --experiment, --n and --noise over a base document"""
    spec = dict(base)
    if _given(args, "generator"):
        spec.update(read_generator_spec(args.generator).model_dump(mode="json"))
    if _given(args, "experiment"):
        spec["experiment"] = args.experiment
    if "experiment" not in spec:
        raise ConfigError("no dataset: give --data with --schema and --target, or --experiment")
    if _given(args, "n"):
        spec["n"] = args.n
    spec.setdefault("n", DEFAULT_N[Experiment(spec["experiment"])])
    if _given(args, "noise"):
        spec["params"] = {**spec.get("params", {}), "noise_fraction": args.noise}
    return spec


def forest_from_args(args: argparse.Namespace, base: Dict[str, Any], n: Optional[int]) -> Dict[str, Any]:
    forest = {"num_trees": settings.num_trees, "min_node_size": settings.min_node_size, **base}
    if getattr(args, "theory_mode", False):
        theory = ForestParams.theory_mode(
            n=n,
            subsample_size=args.subsample,
            gamma=args.gamma if args.gamma is not None else 0.05,
            delta=args.delta if args.delta is not None else 0.05,
        )
        forest.update(theory.model_dump(include={"resampling", "subsample_size", "gamma", "delta"}))
    for flag, field in (
        ("trees", "num_trees"),
        ("mtry", "mtry"),
        ("min_node_size", "min_node_size"),
        ("max_depth", "max_depth"),
        ("max_leaves", "max_leaves"),
        ("gamma", "gamma"),
        ("delta", "delta"),
    ):
        if _given(args, flag):
            forest[field] = getattr(args, flag)
    return forest


def build_config(args: argparse.Namespace, command: Command) -> RunConfig:
    """
    Merge settings, an optional --config file and explicit flags, in that order.

    pydantic validation errors surface as ConfigError.
    """
    document: Dict[str, Any] = _read_json(args.config) if _given(args, "config") else {}
    document["command"] = command.value
    source = dict(document.get("source", {}))

    try:
        if _given(args, "data"):
            source = {"path": args.data, "columns": args.schema, "target": args.target}
        elif not source.get("path"):
            source = {"generator": generator_from_args(args, source.get("generator", {}))}
        if _given(args, "forest"):
            source["forest_path"] = args.forest
        if source.get("generator"):
            GeneratorSpec.model_validate(source["generator"])
            n = source["generator"]["n"]
        else:
            n = None
        document["source"] = source
        document["forest"] = forest_from_args(args, document.get("forest", {}), n)

        for flag, field in (
            ("subsets", "num_subsets"),
            ("sampler", "sampler"),
            ("estimator", "strategy"),
            ("marginal_draws", "marginal_draws"),
            ("reps", "repetitions"),
            ("seed", "seed"),
            ("out", "output_dir"),
            ("n_jobs", "n_jobs"),
        ):
            if _given(args, flag):
                document[field] = getattr(args, flag)
        if getattr(args, "no_cache", False):
            document["use_cache"] = False
        if getattr(args, "no_plot", False):
            document["plot"] = False
        if getattr(args, "strict", False):
            document["strict_solver"] = True
        if _given(args, "k_list"):
            document["k_list"] = args.k_list
        return RunConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError("invalid run configuration", {"errors": e.errors(include_url=False, include_input=False)})


def generator_spec(args: argparse.Namespace) -> GeneratorSpec:
    try:
        spec = generator_from_args(args, {})
        if _given(args, "seed"):
            spec["seed"] = args.seed
        return GeneratorSpec.model_validate(spec)
    except ValidationError as e:
        raise ConfigError("invalid generator spec", {"errors": e.errors(include_url=False, include_input=False)})


def parse_k_list(text: str) -> List[int]:
    try:
        return [int(token) for token in text.split(",") if token.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"K list must be comma separated integers, got '{text}'")
