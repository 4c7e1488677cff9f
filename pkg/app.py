"""
Command-line entry point for the SGA panorama toolkit.

Usage:
    python app.py <command> [options]
    python app.py sga-validate --manifest data/manifest.json --predictor dir:preds --report out/sga
"""

import sys

from modules.cli import run

if __name__ == "__main__":
    sys.exit(run())
