"""
Configuration settings for the SGA panorama toolkit.

Module-level defaults follow the training and validation setup used for
rotation-robust panoramic segmentation. A TOML file can override any CLI flag;
see load_config.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import toml

from modules.errors import UsageError

# Labels
DEFAULT_IGNORE_ID = 255

# Stanford2D3D panoramic classes, in id order
STANFORD2D3D_CLASSES = [
    "beam", "board", "bookcase", "ceiling", "chair", "clutter", "column",
    "door", "floor", "sofa", "table", "wall", "window",
]

# Sphere geometry
POLE_EPSILON = 1e-12          # |sin lat| below this is a pole
POLE_NUDGE = 1e-9             # radians, meridian-limit offset for pole rows
UNIT_NORM_TOLERANCE = 1e-9
ROTATION_TOLERANCE = 1e-12

# Training-time SGA augmentation: (pitch, roll, yaw) maxima in degrees
TRAIN_MAX_PITCH = 10.0
TRAIN_MAX_ROLL = 10.0
TRAIN_MAX_YAW = 360.0
AUGMENT_PROBABILITY = 0.5

# SGA validation grid, degrees
GRID_YAW = (0.0, 90.0, 180.0, 270.0)
GRID_PITCH = (0.0, 5.0)
GRID_ROLL = (0.0, 5.0)

# Disturbance settings: name -> (pitch max, roll max); yaw always 0/90/180/270
SGA_PRESETS: Dict[str, Tuple[float, float]] = {
    "0-0-360": (0.0, 0.0),
    "1-1-360": (1.0, 1.0),
    "3-3-360": (3.0, 3.0),
    "5-5-360": (5.0, 5.0),
    "10-10-360": (10.0, 10.0),
}

# Loss
LAMBDA_W = 0.3
LAMBDA_S = 0.3
CE_PROB_CLAMP = 1e-12

# Predictor retry settings
MAX_PREDICTOR_RETRIES = 3
RETRY_DELAY_BASE = 2  # seconds

# Logging
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
DEFAULT_LOG_LEVEL = "INFO"

APP_TITLE = "SGA panorama toolkit"
APP_DESCRIPTION = (
    "Rotate equirectangular panoramas on the sphere, compute SDPE and "
    "panorama-aware losses, and run rotation-grid (SGA) validation."
)


def load_config(path: Optional[str], section: str) -> Dict[str, Any]:
    """
    Load the override table for one subcommand from a TOML file.

    Args:
        path: Path to the TOML file, or None
        section: Subcommand name, used as the table name

    Returns:
        Dictionary of overrides keyed by flag name with underscores
    """
    if not path:
        return {}

    config_path = Path(path)
    if not config_path.is_file():
        raise UsageError(f"Config file not found: {path}")

    try:
        data = toml.load(config_path)
    except toml.TomlDecodeError as e:
        raise UsageError(f"Config file {path} is not valid TOML: {e}") from e

    table = data.get(section, {})
    if not isinstance(table, dict):
        raise UsageError(f"Config section [{section}] must be a table")

    return {key.replace("-", "_"): value for key, value in table.items()}
