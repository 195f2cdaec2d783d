"""
The ``superframe`` command line.

Every subcommand writes ``run_manifest.json`` next to its outputs and exits
with 0 on success, 2 on invalid arguments, 3 on missing or corrupt data and
4 on any other failure. Failures print a single line
``superframe: error[<category>]: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Sequence

import jax.numpy as jnp

from superframe import __version__
from superframe.clip import VideoClip
from superframe.data import (
    MANIFEST_NAME,
    DegradationConfig,
    crop_to_multiple,
    degrade,
    load_clip,
    load_manifest,
    load_prepared,
    prepare_dataset,
    write_clip,
)
from superframe.data.io import atomic_write_bytes
from superframe.elements import PerceptualDistance
from superframe.errors import DataError, SuperframeError
from superframe.evaluation import (
    MetricReport,
    bicubic_baseline,
    evaluate,
    plot_per_frame,
    plot_training_log,
    reference_columns,
    render_table,
    report_columns,
    table_csv,
)
from superframe.functional import ProtocolConfig
from superframe.ops import bicubic_upsample
from superframe.systems import describe
from superframe.training import TrainConfig, infer, load_config, resolve_config, save_config, train

logger = logging.getLogger("superframe")

EXIT_ARGS = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4
RUN_MANIFEST = "run_manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        print(f"superframe: error[args]: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ARGS)


def home() -> Path:
    """Default root of CLI outputs, ``$SUPERFRAME_HOME`` or ``./runs``."""
    return Path(os.environ.get("SUPERFRAME_HOME", "runs"))


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def write_run_manifest(
    directory: Path, args: argparse.Namespace, config: dict[str, Any] | None = None
) -> Path:
    arguments = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "subcommand": args.command,
        "arguments": _jsonable(arguments),
        "config": _jsonable(config),
        "seed": (config or {}).get("seed"),
        "version": __version__,
    }
    path = Path(directory) / RUN_MANIFEST
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(path, (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode())
    return path


def _protocol(args: argparse.Namespace) -> ProtocolConfig:
    return ProtocolConfig(border=args.border, border_at=args.border_at)


def _distance(args: argparse.Namespace) -> PerceptualDistance:
    if args.lpips_weights is not None:
        return PerceptualDistance.from_weights(args.lpips_weights)
    return PerceptualDistance.default()


def _load_hr_clips(root: Path, layout: str) -> list[VideoClip]:
    """HR clips of a raw scene tree, or the HR side of a prepared tree."""
    if (root / MANIFEST_NAME).is_file():
        return [p.hr for p in load_prepared(root)]
    manifest = load_manifest(root, layout)
    return [load_clip(manifest, scene_id) for scene_id in manifest.scene_ids]


def _train_config(args: argparse.Namespace) -> TrainConfig:
    overrides: dict[str, Any] = {}
    if args.preset is not None:
        overrides["preset"] = args.preset
    if getattr(args, "steps", None) is not None:
        overrides["total_steps"] = args.steps
    if getattr(args, "output_dir", None) is not None:
        overrides["output_dir"] = str(args.output_dir)
    if args.config is not None:
        config = load_config(args.config, **overrides)
    else:
        config = resolve_config(overrides.pop("preset", "exp4_1"), **overrides)
    if "output_dir" not in overrides and config.output_dir == TrainConfig.output_dir:
        config = replace(config, output_dir=str(home() / "train" / config.preset))
    return config


def cmd_prepare_data(args: argparse.Namespace) -> None:
    config = DegradationConfig(args.sigma, args.ksize, args.scale)
    records = prepare_dataset(args.input, args.output, config, args.layout, args.force)
    write_run_manifest(args.output, args, asdict(config))
    print(f"Prepared {len(records)} scenes in {args.output}")


def cmd_train(args: argparse.Namespace) -> None:
    config = _train_config(args)
    output_dir = Path(config.output_dir)
    save_config(config, output_dir / "config.txt")
    write_run_manifest(output_dir, args, config.to_dict())
    result = train(config, resume=not args.no_resume)
    print(f"Final checkpoint {result.checkpoint}, log {result.log}")


def cmd_infer(args: argparse.Namespace) -> None:
    manifest = load_manifest(args.input, args.layout)
    for scene_id in manifest.scene_ids:
        lr = load_clip(manifest, scene_id)
        sr = infer(args.checkpoint, lr, chunk_size=args.chunk_size)
        write_clip(args.output / scene_id, sr)
        if args.save_pairs:
            scale = sr.spatial_shape[0] // lr.spatial_shape[0]
            upsampled = jnp.clip(bicubic_upsample(lr.frames, scale), 0.0, 1.0)
            pairs = jnp.concatenate([upsampled, sr.frames], axis=-2)
            write_clip(args.output / "pairs" / scene_id, VideoClip(pairs, scene_id))
        logger.info("Super-resolved %s (%d frames)", scene_id, sr.num_frames)
    write_run_manifest(args.output, args)
    print(f"Wrote {len(manifest.scene_ids)} scenes to {args.output}")


def cmd_evaluate(args: argparse.Namespace) -> None:
    gen = _load_hr_clips(args.gen, args.layout)
    gt = _load_hr_clips(args.gt, args.layout)
    report = evaluate(gen, gt, _protocol(args), _distance(args), model=args.model or str(args.gen))
    report.save(args.report)
    write_run_manifest(args.report.parent, args)
    print(render_table(report_columns([report])), end="")


def cmd_baseline(args: argparse.Namespace) -> None:
    if (args.gt / MANIFEST_NAME).is_file():
        pairs = load_prepared(args.gt)
    else:
        config = DegradationConfig(args.sigma, args.ksize, args.scale)
        pairs = [
            degrade(crop_to_multiple(clip, config.scale), config.sigma, config.ksize, config.scale)
            for clip in _load_hr_clips(args.gt, args.layout)
        ]
    report = bicubic_baseline(pairs, _protocol(args), _distance(args))
    report.save(args.report)
    write_run_manifest(args.report.parent, args)
    print(render_table(report_columns([report])), end="")


def cmd_report(args: argparse.Namespace) -> None:
    reports = [MetricReport.load(path) for path in args.inputs]
    labels = args.labels or [r.model for r in reports]
    if len(labels) != len(reports):
        raise ValueError(f"Got {len(labels)} labels for {len(reports)} reports")
    columns = report_columns(reports, labels)
    if args.reference is not None:
        columns += reference_columns(args.reference)
    args.out.mkdir(parents=True, exist_ok=True)
    table = render_table(columns)
    (args.out / "table.txt").write_text(table)
    (args.out / "table.csv").write_text(table_csv(columns))
    plot_per_frame(reports, args.out / "plots", labels=labels)
    if args.training_log is not None:
        plot_training_log(args.training_log, args.out / "plots" / "training_loss.png")
    write_run_manifest(args.out, args)
    print(table, end="")


def cmd_describe(args: argparse.Namespace) -> None:
    config = _train_config(args)
    counts = describe(config.generator_config, config.flow_variant)
    width = max(len(k) for k in counts)
    for name, count in counts.items():
        print(f"{name.ljust(width)}  {count:>10,}")
    write_run_manifest(home() / "describe", args, config.to_dict())


def _add_protocol_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--border", type=int, default=8, help="Pixels excluded at every side.")
    parser.add_argument("--border-at", choices=["hr", "lr"], default="hr", help="Scale the border is measured at.")
    parser.add_argument("--lpips-weights", type=Path, help="Serialized perceptual backbone weights.")
    parser.add_argument("--layout", choices=["flat-scene-dirs", "septuplet"], default="flat-scene-dirs")


def _add_degradation_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sigma", type=float, default=1.5, help="Gaussian blur sigma in HR pixels.")
    parser.add_argument("--ksize", type=int, default=13, help="Gaussian blur taps.")
    parser.add_argument("--scale", type=int, default=4, help="Downsampling factor.")


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="A 'key = value' TrainConfig file.")
    parser.add_argument("--preset", choices=["exp4_1", "exp4_2", "exp4_3", "rbpn_only"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="superframe", description="Video super-resolution with back-projection GANs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug messages.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare-data", help="Degrade HR scenes into an LR/HR tree.")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    _add_degradation_args(p)
    p.add_argument("--layout", choices=["flat-scene-dirs", "septuplet"], default="flat-scene-dirs")
    p.add_argument("--force", action="store_true", help="Rewrite scenes that already exist.")
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train", help="Train a model.")
    _add_config_args(p)
    p.add_argument("--steps", type=int, help="Override total_steps.")
    p.add_argument("--output-dir", type=Path, help="Override output_dir.")
    p.add_argument("--no-resume", action="store_true", help="Ignore existing checkpoints.")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="Super-resolve LR scenes with a checkpoint.")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--layout", choices=["flat-scene-dirs", "septuplet"], default="flat-scene-dirs")
    p.add_argument("--chunk-size", type=int, default=8, help="Target frames per forward pass.")
    p.add_argument("--save-pairs", action="store_true", help="Also write bicubic/SR side-by-side frames.")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="Compute metrics of generated scenes.")
    p.add_argument("--gen", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--model", help="Model identity stored in the report.")
    _add_protocol_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="Compute metrics of bicubic upsampling.")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)
    _add_degradation_args(p)
    _add_protocol_args(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="Render comparison tables and plots.")
    p.add_argument("--inputs", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--labels", nargs="+", help="Column labels, one per input.")
    p.add_argument("--reference", choices=["Vid4", "ToS3"], help="Add the published rows of a dataset.")
    p.add_argument("--training-log", type=Path, help="Also plot the losses of a training log.")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("describe", help="Print parameter counts.")
    _add_config_args(p)
    p.set_defaults(func=cmd_describe)
    return parser


def _fail(category: str, error: BaseException, code: int) -> int:
    message = " ".join(str(error).split()) or error.__class__.__name__
    print(f"superframe: error[{category}]: {message}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except DataError as e:
        return _fail(e.category, e, EXIT_DATA)
    except ValueError as e:
        return _fail("value", e, EXIT_ARGS)
    except SuperframeError as e:
        return _fail(e.category, e, EXIT_RUNTIME)
    except Exception as e:
        logger.debug("Unhandled error", exc_info=True)
        return _fail("runtime", e, EXIT_RUNTIME)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
