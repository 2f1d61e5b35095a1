import argparse
import logging
from pathlib import Path
from typing import Any, Dict

from shapley_forest.cli.options import (
    add_data_flags,
    add_estimation_flags,
    add_forest_flags,
    build_config,
    parse_k_list,
)
from shapley_forest.core.config import settings
from shapley_forest.crud.reports import write_ablation, write_effects, write_ksweep, write_report
from shapley_forest.schemas.run import Command
from shapley_forest.services.harness import run_ablation, run_ksweep, run_shapley
from shapley_forest.services.plotting import emit_plot

logger = logging.getLogger(__name__)

DEFAULT_K_LIST = [10, 50, 100, 200, 500, 1000, 3000]


def cmd_shapley(args: argparse.Namespace) -> Dict[str, Any]:
    """Estimate Shapley effects, write the report and, unless disabled, the plot"""
    command = Command(args.command)
    config = build_config(args, command)
    report = run_shapley(config)
    out = Path(config.output_dir)
    paths = write_report(report, out)
    if report.summary.ground_truth is not None:
        paths["truth"] = write_effects(report.summary.ground_truth, out / "truth.csv", report.variables)
    if config.plot:
        paths["plot"] = emit_plot(report, out / f"shapley.{settings.plot_format}")
    return {
        "effects": dict(zip(report.variables, report.summary.mean)),
        "cumulative_error": report.summary.cumulative_error,
        "files": {name: str(path) for name, path in paths.items()},
    }


def cmd_ablation(args: argparse.Namespace) -> Dict[str, Any]:
    config = build_config(args, Command.ABLATION)
    report = run_ablation(config)
    paths = write_ablation(report, config.output_dir)
    return {
        "cells": [
            {"sampler": cell.sampler.value, "estimator": cell.strategy.value, "cumulative_error": cell.cumulative_error}
            for cell in report.cells
        ],
        "files": {name: str(path) for name, path in paths.items()},
    }


def cmd_ksweep(args: argparse.Namespace) -> Dict[str, Any]:
    config = build_config(args, Command.KSWEEP)
    report = run_ksweep(config, config.k_list or DEFAULT_K_LIST)
    paths = write_ksweep(report, config.output_dir)
    return {
        "rows": [{"K": row.num_subsets, "mean_error": row.mean_error} for row in report.rows],
        "spearman": report.spearman,
        "adjacent_decreases": report.adjacent_decreases,
        "files": {name: str(path) for name, path in paths.items()},
    }


def register(subparsers: argparse._SubParsersAction) -> None:
    for name, help_text in (
        (Command.SHAPLEY.value, "estimate Shapley effects on a CSV file or a generated sample"),
        (Command.EXPERIMENT.value, "run a generated experiment against its theoretical effects"),
    ):
        parser = subparsers.add_parser(name, help=help_text)
        add_data_flags(parser)
        add_forest_flags(parser)
        add_estimation_flags(parser)
        parser.set_defaults(func=cmd_shapley)

    parser = subparsers.add_parser(Command.ABLATION.value, help="compare every sampler and value estimator")
    add_data_flags(parser)
    add_forest_flags(parser)
    add_estimation_flags(parser)
    parser.set_defaults(func=cmd_ablation)

    parser = subparsers.add_parser(Command.KSWEEP.value, help="cumulative error for increasing numbers of subsets")
    add_data_flags(parser)
    add_forest_flags(parser)
    add_estimation_flags(parser)
    parser.add_argument(
        "--k-list",
        type=parse_k_list,
        help="ascending comma separated subset counts (default 10,50,100,200,500,1000,3000)",
    )
    parser.set_defaults(func=cmd_ksweep)
