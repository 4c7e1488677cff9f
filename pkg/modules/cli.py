"""
Command-line front end for the SGA panorama toolkit.

Every subcommand validates its flags before touching the filesystem. A TOML
file given with --config can supply any flag (table named after the
subcommand); flags typed on the command line win.

Exit codes: 0 success, 1 usage error, 2 data error, 3 predictor failure.
"""

import argparse
import logging
import math
import shutil
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Set

import numpy as np
import pandas as pd
from PIL import Image as PILImage

from modules import __version__
from modules.config import (
    APP_DESCRIPTION,
    APP_TITLE,
    AUGMENT_PROBABILITY,
    DEFAULT_LOG_LEVEL,
    GRID_PITCH,
    GRID_ROLL,
    GRID_YAW,
    LAMBDA_S,
    MAX_PREDICTOR_RETRIES,
    RETRY_DELAY_BASE,
    SGA_PRESETS,
    STANFORD2D3D_CLASSES,
    TRAIN_MAX_PITCH,
    TRAIN_MAX_ROLL,
    TRAIN_MAX_YAW,
    load_config,
)
from modules.core.panorama_loss import weight_map
from modules.core.sdpe_constraints import inter_loss, intra_loss, sdpe_loss
from modules.errors import DataError, EmptyInputError, PredictorError, SgaError, UsageError
from modules.evaluation import seg_metrics
from modules.evaluation.predictor_factory import PredictorFactory
from modules.evaluation.predictors import DirectoryPredictor, PredictionRequest
from modules.evaluation.sga_validation import (
    METRICS,
    build_grid,
    compare_reports,
    grid_from_preset,
    run_sga_validation,
)
from modules.geometry.rotation3d import RotationAngles, compose
from modules.geometry.sphere_core import ImageDims
from modules.image_processing.augmentation import AugmentationConfig, augment_dataset
from modules.image_processing.image_validation import validate_manifest, validate_prediction_dir
from modules.image_processing.sga_projection import rotate_erp, rotate_labels
from modules.output import report_writer
from modules.utils import dataset_io
from modules.utils.console import configure_logging
from modules.utils.statistics import aggregate_values

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _format_list(values: Sequence[float]) -> str:
    return ",".join(f"{v:g}" for v in values)


def parse_angle_list(text: str, name: str) -> List[float]:
    """Parse a comma-separated list of finite degrees."""
    try:
        values = [float(part) for part in str(text).split(",") if part.strip()]
    except ValueError as e:
        raise UsageError(f"{name} must be a comma-separated list of numbers, got '{text}'") from e
    if not values:
        raise UsageError(f"{name} must not be empty")
    if not all(math.isfinite(v) for v in values):
        raise UsageError(f"{name} values must be finite")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML file overriding flags of this subcommand")
    common.add_argument("--log-level", default=DEFAULT_LOG_LEVEL, help="Logging level")
    common.add_argument("--quiet", action="store_true", help="Hide progress bars")
    common.add_argument("--jobs", type=int, default=1, help="Worker threads for dataset-parallel work")

    parser = _Parser(prog="sga", description=f"{APP_TITLE}: {APP_DESCRIPTION}",
                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help_text, parents=[common],
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    p = add("rotate", "Rotate one ERP image or label map on the sphere")
    p.add_argument("--input", help="Input PNG")
    p.add_argument("--output", help="Output PNG")
    p.add_argument("--yaw", type=float, default=0.0, help="Yaw in degrees")
    p.add_argument("--pitch", type=float, default=0.0, help="Pitch in degrees")
    p.add_argument("--roll", type=float, default=0.0, help="Roll in degrees")
    p.add_argument("--mode", choices=["image", "label"], default="image", help="Input kind")

    p = add("augment", "Write randomly rotated copies of a dataset")
    p.add_argument("--manifest", help="Dataset manifest (JSON)")
    p.add_argument("--out-dir", help="Output directory")
    p.add_argument("--count", type=int, default=1, help="Variants per sample")
    p.add_argument("--seed", type=int, default=0, help="Random seed")
    p.add_argument("--max-yaw", type=float, default=TRAIN_MAX_YAW, help="Maximum yaw, degrees")
    p.add_argument("--max-pitch", type=float, default=TRAIN_MAX_PITCH, help="Maximum pitch, degrees")
    p.add_argument("--max-roll", type=float, default=TRAIN_MAX_ROLL, help="Maximum roll, degrees")
    p.add_argument("--prob", type=float, default=AUGMENT_PROBABILITY, help="Probability of rotating")

    p = add("evaluate", "Evaluate precomputed predictions without rotation")
    p.add_argument("--pred-dir", help="Directory of <sample_id>.png predictions")
    p.add_argument("--manifest", help="Dataset manifest (JSON)")
    p.add_argument("--classes", type=int, default=None, help="Number of classes (default: from manifest)")
    p.add_argument("--report", help="Output metrics record (JSON)")

    p = add("sga-validate", "Run SGA validation over a rotation grid")
    p.add_argument("--manifest", help="Dataset manifest (JSON)")
    p.add_argument("--predictor", help="dir:PATH or cmd:TEMPLATE with {input}/{output}")
    p.add_argument("--grid-yaw", default=_format_list(GRID_YAW), help="Yaw values, degrees")
    p.add_argument("--grid-pitch", default=_format_list(GRID_PITCH), help="Pitch values, degrees")
    p.add_argument("--grid-roll", default=_format_list(GRID_ROLL), help="Roll values, degrees")
    p.add_argument("--preset", choices=sorted(SGA_PRESETS), default=None,
                   help="Named disturbance setting; explicit --grid-* flags win")
    p.add_argument("--retries", type=int, default=MAX_PREDICTOR_RETRIES, help="Attempts per image (cmd)")
    p.add_argument("--retry-delay", type=float, default=RETRY_DELAY_BASE, help="Back-off base, seconds")
    p.add_argument("--report", help="Report path (JSON; CSV tables written alongside)")

    p = add("aggregate", "Recompute Mean / Variance / Range")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--values", help="Comma-separated values, or a file with one value per line")
    source.add_argument("--report", help="SGA report (JSON)")
    p.add_argument("--precision", type=int, default=3, help="Decimals printed")

    p = add("weights", "Write the panorama-aware weight map")
    p.add_argument("--height", type=int, help="Image height H")
    p.add_argument("--width", type=int, default=None, help="Image width (default 2*H)")
    p.add_argument("--output", help=".png (8-bit, x255) or text matrix")

    p = add("compare", "Compare two SGA reports")
    p.add_argument("--baseline", help="Baseline report (JSON)")
    p.add_argument("--candidate", help="Candidate report (JSON)")
    p.add_argument("--output", default=None, help="Optional CSV output")
    p.add_argument("--precision", type=int, default=3, help="Decimals printed")

    p = add("sdpe", "Evaluate SDPE offset constraints on a stored offset field")
    p.add_argument("--offsets", help="Offset field (.npz or text table)")
    p.add_argument("--normalize", action="store_true", help="Mean instead of sum reduction")
    p.add_argument("--lambda-s", type=float, default=LAMBDA_S, help="Weight of the SDPE term")

    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise UsageError(f"Unknown command '{command}'")


def _explicit_dests(subparser: argparse.ArgumentParser, argv: Sequence[str]) -> Set[str]:
    """Destinations of flags typed on the command line for the chosen subcommand."""
    explicit = set()
    for token in argv:
        if not token.startswith("--"):
            continue
        action = subparser._option_string_actions.get(token.split("=", 1)[0])
        if action is not None:
            explicit.add(action.dest)
    return explicit


def _apply_config(args: argparse.Namespace, subparser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Fill flags from the [<command>] table of --config; flags on the command line win."""
    explicit = _explicit_dests(subparser, argv)
    actions = {action.dest: action for action in subparser._actions}
    for key, value in load_config(args.config, args.command).items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"Unknown key '{key}' in [{args.command}] of {args.config}")
        if key in explicit:
            continue
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        if isinstance(action, argparse._StoreTrueAction):
            if not isinstance(value, bool):
                raise UsageError(f"Config key '{key}' must be true or false")
        elif action.type is not None:
            try:
                value = action.type(value)
            except (TypeError, ValueError) as e:
                raise UsageError(f"Config key '{key}' has an invalid value: {value!r}") from e
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"Config key '{key}' must be one of {sorted(action.choices)}")
        setattr(args, key, value)
    args.explicit = explicit


REQUIRED_FLAGS: Dict[str, Sequence[str]] = {
    "rotate": ("input", "output"),
    "augment": ("manifest", "out_dir"),
    "evaluate": ("pred_dir", "manifest", "report"),
    "sga-validate": ("manifest", "predictor", "report"),
    "aggregate": (),
    "weights": ("height", "output"),
    "compare": ("baseline", "candidate"),
    "sdpe": ("offsets",),
}


def _validate(args: argparse.Namespace) -> None:
    """Check flag values before any I/O."""
    missing = ["--" + dest.replace("_", "-") for dest in REQUIRED_FLAGS[args.command]
               if getattr(args, dest) is None]
    if missing:
        raise UsageError(f"{args.command}: the following arguments are required: {', '.join(missing)}")
    if args.command == "aggregate" and (args.values is None) == (args.report is None):
        raise UsageError("aggregate: exactly one of --values or --report is required")

    if args.jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {args.jobs}")

    if args.command == "rotate":
        RotationAngles(args.yaw, args.pitch, args.roll)
    elif args.command == "augment":
        if args.count < 1:
            raise UsageError(f"--count must be >= 1, got {args.count}")
        AugmentationConfig(RotationAngles(args.max_yaw, args.max_pitch, args.max_roll), args.prob)
    elif args.command == "evaluate":
        if args.classes is not None and not 1 <= args.classes <= 255:
            raise UsageError(f"--classes must be in 1..255, got {args.classes}")
    elif args.command == "sga-validate":
        for flag in ("grid_yaw", "grid_pitch", "grid_roll"):
            parse_angle_list(getattr(args, flag), "--" + flag.replace("_", "-"))
        if args.retries < 1:
            raise UsageError(f"--retries must be >= 1, got {args.retries}")
        if args.retry_delay < 0:
            raise UsageError(f"--retry-delay must be >= 0, got {args.retry_delay}")
    elif args.command in ("aggregate", "compare"):
        if args.precision < 0:
            raise UsageError(f"--precision must be >= 0, got {args.precision}")
    elif args.command == "weights":
        width = args.width if args.width is not None else 2 * args.height
        if args.height < 2 or width < 2:
            raise UsageError(f"Weight map needs height and width >= 2, got {args.height}x{width}")
    elif args.command == "sdpe":
        if not (math.isfinite(args.lambda_s) and args.lambda_s >= 0):
            raise UsageError(f"--lambda-s must be finite and >= 0, got {args.lambda_s}")


def _class_names(manifest: dataset_io.DatasetManifest) -> Optional[List[str]]:
    """Manifest class names, or the Stanford2D3D names for an unnamed 13-class dataset."""
    if manifest.class_names:
        return manifest.class_names
    if manifest.num_classes == len(STANFORD2D3D_CLASSES):
        return list(STANFORD2D3D_CLASSES)
    return None


def _load_checked_manifest(path: str) -> dataset_io.DatasetManifest:
    manifest = dataset_io.load_manifest(path)
    valid, errors = validate_manifest(manifest)
    if not valid:
        for error in errors:
            logger.error(error)
        raise DataError(f"Manifest {path} failed validation ({len(errors)} problems)")
    return manifest


def _cmd_rotate(args: argparse.Namespace) -> int:
    angles = RotationAngles(args.yaw, args.pitch, args.roll)
    r = compose(angles)
    if args.mode == "label":
        labels = dataset_io.load_labels(args.input)
        if angles.is_zero:
            # identity keeps the input file byte for byte
            shutil.copyfile(args.input, args.output)
        else:
            dataset_io.save_labels(args.output, rotate_labels(labels, r))
    else:
        image = dataset_io.load_image(args.input)
        dataset_io.save_image(args.output, rotate_erp(image, r))
    logger.info("Rotated %s by (yaw, pitch, roll) = %s -> %s", args.input, angles.as_tuple(), args.output)
    return 0


def _cmd_augment(args: argparse.Namespace) -> int:
    cfg = AugmentationConfig(RotationAngles(args.max_yaw, args.max_pitch, args.max_roll), args.prob)
    manifest = _load_checked_manifest(args.manifest)
    augment_dataset(manifest, Path(args.out_dir), args.count, cfg, args.seed,
                    jobs=args.jobs, show_progress=not args.quiet)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    manifest = _load_checked_manifest(args.manifest)
    num_classes = args.classes or manifest.num_classes
    predictor = DirectoryPredictor(Path(args.pred_dir), per_situation=False)
    dataset = dataset_io.load_dataset(manifest, jobs=args.jobs)

    cm = seg_metrics.ConfusionMatrix.empty(num_classes)
    for sample in dataset:
        pred = predictor.predict(PredictionRequest(sample.sample_id, 0, sample.image, manifest.ignore_id))
        cm = cm + seg_metrics.accumulate(pred, sample.labels, num_classes)

    record = cm.to_record(_class_names(manifest))
    report_writer.write_record(record, args.report)
    print(f"mIoU: {record['miou']:.6f}")
    print(f"Pixel accuracy: {record['pixel_accuracy']:.6f}")
    print(f"Evaluated pixels: {record['evaluated_pixels']}")
    return 0


def _resolve_grid(args: argparse.Namespace):
    grid_flags = {"grid_yaw", "grid_pitch", "grid_roll"}
    if args.preset and not (grid_flags & args.explicit):
        return grid_from_preset(args.preset)
    return build_grid(parse_angle_list(args.grid_yaw, "--grid-yaw"),
                      parse_angle_list(args.grid_pitch, "--grid-pitch"),
                      parse_angle_list(args.grid_roll, "--grid-roll"))


def _cmd_sga_validate(args: argparse.Namespace) -> int:
    grid = _resolve_grid(args)
    predictor = PredictorFactory.create_predictor(args.predictor, args.retries, args.retry_delay)
    manifest = _load_checked_manifest(args.manifest)

    if isinstance(predictor, DirectoryPredictor):
        complete, missing = validate_prediction_dir(predictor.root, manifest, len(grid))
        if not complete:
            logger.warning("%d predictions missing, first: %s", len(missing), missing[0])

    dataset = dataset_io.load_dataset(manifest, jobs=args.jobs)
    try:
        report = run_sga_validation(dataset, predictor, grid, manifest.num_classes,
                                    class_names=_class_names(manifest), jobs=args.jobs,
                                    show_progress=not args.quiet)
    except EmptyInputError as e:
        raise PredictorError(str(e)) from e

    report_writer.write_report(report, args.report)
    print(report_writer.summary_table(report).to_string(index=False))
    return 3 if report.failed_situations else 0


def _read_values(text: str) -> List[float]:
    path = Path(text)
    if path.is_file():
        frame = pd.read_csv(path, header=None, comment="#")
        values = frame.to_numpy(dtype=np.float64).ravel()
        return [float(v) for v in values if not np.isnan(v)]
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise UsageError(f"--values must be comma-separated numbers or a file, got '{text}'") from e


def _cmd_aggregate(args: argparse.Namespace) -> int:
    fmt = f"{{:.{args.precision}f}}"
    if args.values is not None:
        agg = aggregate_values(_read_values(args.values))
        print(f"Mean: {fmt.format(agg.mean)}")
        print(f"Variance: {fmt.format(agg.variance)}")
        print(f"Range: {fmt.format(agg.range)}")
        return 0

    report = report_writer.load_report(args.report)
    for metric in METRICS:
        agg = report.aggregates[metric]
        print(f"{metric}: Mean {fmt.format(agg.mean)} / Variance {fmt.format(agg.variance)} "
              f"/ Range {fmt.format(agg.range)}")
    return 0


def _cmd_weights(args: argparse.Namespace) -> int:
    dims = ImageDims(args.height, args.width if args.width is not None else 2 * args.height)
    data = np.asarray(weight_map(dims).data)
    output = Path(args.output)
    if output.suffix.lower() == ".png":
        PILImage.fromarray(np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8)).save(output, format="PNG")
    else:
        np.savetxt(output, data, fmt="%.12f")
    logger.info("Weight map %dx%d written to %s", dims.height, dims.width, output)
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    baseline = report_writer.load_report(args.baseline)
    candidate = report_writer.load_report(args.candidate)
    table = report_writer.comparison_table(compare_reports(baseline, candidate))
    if args.output:
        table.to_csv(args.output, index=False)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.{args.precision}f}"))
    return 0


def _cmd_sdpe(args: argparse.Namespace) -> int:
    offsets = dataset_io.load_offsets(args.offsets)
    intra = intra_loss(offsets, args.normalize)
    inter = inter_loss(offsets, args.normalize)
    total = sdpe_loss(offsets, args.normalize)
    print(f"L_intra: {intra.value:.6f}")
    print(f"L_inter: {inter.value:.6f}")
    print(f"L_SDPE: {total.value:.6f}")
    print(f"lambda_s * L_SDPE: {args.lambda_s * total.value:.6f}")
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "rotate": _cmd_rotate,
    "augment": _cmd_augment,
    "evaluate": _cmd_evaluate,
    "sga-validate": _cmd_sga_validate,
    "aggregate": _cmd_aggregate,
    "weights": _cmd_weights,
    "compare": _cmd_compare,
    "sdpe": _cmd_sdpe,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map errors to exit codes.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        Process exit code
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args, _subparser(parser, args.command), argv)
        configure_logging(args.log_level)
        _validate(args)
        return COMMANDS[args.command](args)
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)
    except SgaError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected error: %s", e)
        return DataError.exit_code
