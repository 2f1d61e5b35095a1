from typing import Any, Dict, Optional


class ShapleyForestError(Exception):
    """Base error; carries a human readable detail and the CLI exit code"""

    exit_code: int = 1

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context = dict(context or {})

    def with_context(self, **context: Any) -> "ShapleyForestError":
        """Attach run context (stage, repetition, ...) and return self"""
        self.context.update(context)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "detail": self.detail,
            "context": self.context,
        }


class ConfigError(ShapleyForestError):
    exit_code = 2


class DatasetError(ShapleyForestError):
    exit_code = 3


class ForestError(ShapleyForestError):
    exit_code = 3


class SamplingError(ShapleyForestError):
    exit_code = 4


class EstimationError(ShapleyForestError):
    exit_code = 4


class SolverError(ShapleyForestError):
    exit_code = 5


class GroundTruthError(ShapleyForestError):
    exit_code = 4
