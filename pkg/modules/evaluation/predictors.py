"""
Predictors evaluated by the SGA harness.

A predictor turns one (rotated) ERP image into a label map. The harness never
trains anything; it either reads precomputed predictions from a directory or
runs an external command once per image.
"""

import logging
import shlex
import subprocess
import tempfile
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import List

from modules.config import MAX_PREDICTOR_RETRIES, RETRY_DELAY_BASE
from modules.errors import DataError, PredictorError, UsageError
from modules.image_processing.erp_image import ErpImage, LabelMap
from modules.utils import dataset_io

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictionRequest:
    sample_id: str
    situation_index: int
    image: ErpImage
    ignore_id: int


class BasePredictor(ABC):
    """Common interface: predict() returns a LabelMap or raises PredictorError."""

    @abstractmethod
    def predict(self, request: PredictionRequest) -> LabelMap:
        ...

    def describe(self) -> str:
        return type(self).__name__


class DirectoryPredictor(BasePredictor):
    """
    Precomputed predictions.

    With per_situation=True the file for a request is
    <root>/s<index:02d>/<sample_id>.png, otherwise <root>/<sample_id>.png.
    """

    def __init__(self, root: Path, per_situation: bool = True):
        self.root = Path(root)
        self.per_situation = per_situation
        if not self.root.is_dir():
            raise UsageError(f"Prediction directory not found: {self.root}")

    def prediction_path(self, sample_id: str, situation_index: int) -> Path:
        if self.per_situation:
            return self.root / f"s{situation_index:02d}" / f"{sample_id}.png"
        return self.root / f"{sample_id}.png"

    def predict(self, request: PredictionRequest) -> LabelMap:
        path = self.prediction_path(request.sample_id, request.situation_index)
        if not path.is_file():
            raise PredictorError(f"Missing prediction {path}")
        try:
            return dataset_io.load_labels(path, request.ignore_id)
        except DataError as e:
            raise PredictorError(f"Unreadable prediction {path}: {e}") from e

    def describe(self) -> str:
        return f"dir:{self.root}"


class CommandPredictor(BasePredictor):
    """
    External executable run once per image.

    The template is split like a shell command line, then the tokens {input},
    {output}, {sample_id} and {situation} are substituted in every argument.
    The command must write an 8-bit label PNG to {output}.
    """

    def __init__(self, template: str, max_retries: int = MAX_PREDICTOR_RETRIES,
                 retry_delay: float = RETRY_DELAY_BASE):
        self.template = template
        self.args = shlex.split(template)
        if not self.args:
            raise UsageError("Predictor command template is empty")
        if not any("{output}" in arg for arg in self.args):
            raise UsageError("Predictor command template must contain {output}")
        self.max_retries = max(1, max_retries)
        self.retry_delay = retry_delay

    def _build_args(self, input_path: Path, output_path: Path, request: PredictionRequest) -> List[str]:
        tokens = {
            "{input}": str(input_path),
            "{output}": str(output_path),
            "{sample_id}": request.sample_id,
            "{situation}": str(request.situation_index),
        }
        args = []
        for arg in self.args:
            for token, value in tokens.items():
                arg = arg.replace(token, value)
            args.append(arg)
        return args

    def predict(self, request: PredictionRequest) -> LabelMap:
        try:
            return self._run(request)
        except PredictorError:
            raise
        except Exception as e:
            raise PredictorError(f"Predictor crashed on {request.sample_id}: {e}") from e

    def _run(self, request: PredictionRequest) -> LabelMap:
        with tempfile.TemporaryDirectory(prefix="sga_pred_") as tmp:
            input_path = Path(tmp) / f"{request.sample_id}_input.png"
            output_path = Path(tmp) / f"{request.sample_id}_pred.png"
            dataset_io.save_image(input_path, request.image)
            args = self._build_args(input_path, output_path, request)

            retries = 0
            last_error = ""
            while retries < self.max_retries:
                try:
                    result = subprocess.run(args, capture_output=True, check=False)
                    if result.returncode == 0 and output_path.is_file():
                        return dataset_io.load_labels(output_path, request.ignore_id)
                    stderr = result.stderr.decode("utf-8", errors="replace").strip()
                    last_error = f"exit code {result.returncode}: {stderr[:200]}"
                except (OSError, DataError) as e:
                    last_error = str(e)
                retries += 1
                logger.warning("Predictor attempt %d/%d failed for %s (situation %d): %s",
                               retries, self.max_retries, request.sample_id,
                               request.situation_index, last_error)
                if retries < self.max_retries:
                    time.sleep(self.retry_delay * retries)

        raise PredictorError(
            f"Predictor failed after {self.max_retries} attempts on {request.sample_id}: {last_error}"
        )

    def describe(self) -> str:
        return f"cmd:{self.template}"
