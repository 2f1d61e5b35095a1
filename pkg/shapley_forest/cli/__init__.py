import argparse

from shapley_forest.cli import analysis, data
from shapley_forest.core.config import settings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapley_forest",
        description="Shapley effects of a regression sample through a single random forest",
    )
    parser.add_argument("--log-level", default=settings.log_level, help="logging level (default %(default)s)")
    parser.add_argument("--version", action="version", version=f"{settings.app_name} {settings.app_version}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    data.register(subparsers)
    analysis.register(subparsers)
    return parser
