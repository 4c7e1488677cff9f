"""
Factory for creating predictors from a `kind:value` descriptor.
"""

from pathlib import Path

from modules.config import MAX_PREDICTOR_RETRIES, RETRY_DELAY_BASE
from modules.errors import UsageError
from modules.evaluation.predictors import BasePredictor, CommandPredictor, DirectoryPredictor


class PredictorFactory:
    """Factory for predictor objects"""

    @staticmethod
    def create_predictor(descriptor: str, max_retries: int = MAX_PREDICTOR_RETRIES,
                         retry_delay: float = RETRY_DELAY_BASE) -> BasePredictor:
        """
        Create a predictor from its CLI descriptor.

        Args:
            descriptor: "dir:PATH" or "cmd:TEMPLATE"
            max_retries: Attempts per image for command predictors
            retry_delay: Back-off base in seconds for command predictors

        Returns:
            Predictor object of the matching type
        """
        kind, sep, value = descriptor.partition(":")
        kind = kind.strip().lower()

        if not sep or not value:
            raise UsageError(f"Predictor must be 'dir:PATH' or 'cmd:TEMPLATE', got '{descriptor}'")
        if kind == "dir":
            return DirectoryPredictor(Path(value))
        elif kind == "cmd":
            return CommandPredictor(value, max_retries=max_retries, retry_delay=retry_delay)
        raise UsageError(f"Unknown predictor kind '{kind}' (supported: {PredictorFactory.get_supported_kinds()})")

    @staticmethod
    def get_supported_kinds() -> list:
        return ["dir", "cmd"]
