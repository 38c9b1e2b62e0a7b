"""Command-line interface.

Subcommands cover the whole pipeline: `augment` synthesizes degraded
images, `train-prior` fits a restorer on them, `refine` runs the gated
teacher-student loop, `infer` applies a checkpoint, and `score` evaluates
a directory with a quality metric. Every run that writes files also writes
a manifest describing how to reproduce them.

Exit codes: 0 success, 1 usage error, 2 data/environment error,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .degrade import AugmentConfig, augment
from .errors import NightforgeError
from .image import list_images, load_image, save_image
from .iqa import MetricHandle, score_directory
from .refine import (
    REFERENCE_REFINE,
    RefineConfig,
    TeacherStudentState,
    dump_pseudo_labels,
    ensemble_predict,
    refine_loop,
    tile_positions,
    write_audit_log,
)
from .restorer import LinearPatchRestorer, model_from_checkpoint, save_checkpoint
from .rng import RngStream
from .selfprior import REFERENCE_PRIOR, TrainConfig, train_prior, write_loss_trace

_CONFIG_SECTIONS = {"augment", "train", "refine"}

TRAIN_PRESETS = {"reference-prior": REFERENCE_PRIOR}
REFINE_PRESETS = {"reference-refine": REFERENCE_REFINE}


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _jsonable(value):
    """JSON-safe copy: non-finite floats become their repr strings."""
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_manifest(path, command, args_list, seed, config, inputs, outputs):
    manifest = {
        "tool": "nightforge",
        "version": __version__,
        "command": command,
        "argv": list(args_list),
        "seed": seed,
        "config": _jsonable(config),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }
    with open(Path(path), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    unknown = set(data) - _CONFIG_SECTIONS
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    return data


def _merge(*layers: dict) -> dict:
    out: dict = {}
    for layer in layers:
        for k, v in layer.items():
            if v is not None:
                out[k] = v
    return out


def _aug_config(args, file_cfg) -> AugmentConfig:
    overrides = {}
    if getattr(args, "bank", None) is not None:
        overrides["light_bank"] = args.bank
    if getattr(args, "severity_ratio", None) is not None:
        overrides["severity_ratio"] = args.severity_ratio
    return AugmentConfig.from_dict(_merge(file_cfg.get("augment", {}), overrides))


# ----------------------------------------------------------------- augment


def _cmd_augment(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _aug_config(args, file_cfg)
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    files = list_images(in_dir)
    if not files:
        raise NightforgeError(f"no input images in {in_dir}")
    count = args.count if args.count is not None else len(files)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = RngStream(args.seed)
    outputs = []
    for i in range(count):
        src = files[i % len(files)]
        img = load_image(src)
        degraded, record = augment(img, cfg, rng)
        record.source_image = src.name
        png = out_dir / f"aug_{i:05d}.png"
        sidecar = out_dir / f"aug_{i:05d}.json"
        save_image(degraded, png)
        with open(sidecar, "w") as fh:
            json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.extend([png, sidecar])
    write_manifest(
        out_dir / "manifest.json",
        "augment",
        _argv_of(args),
        args.seed,
        cfg.to_dict(),
        [p.name for p in files],
        [p.name for p in outputs],
    )
    return 0


# ------------------------------------------------------------- train-prior


def _train_config(args, file_cfg) -> TrainConfig:
    base = {}
    if args.preset:
        base = TRAIN_PRESETS[args.preset].to_dict()
    overrides = {
        "steps": args.steps,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "crop_size": args.crop_size,
        "loss": args.loss,
        "seed": args.seed,
    }
    return TrainConfig.from_dict(_merge(base, file_cfg.get("train", {}), overrides))


def _cmd_train_prior(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _train_config(args, file_cfg)
    aug_cfg = _aug_config(args, file_cfg)
    data = Path(args.data)
    if not data.is_dir():
        raise NightforgeError(f"data directory {data} does not exist")
    model = LinearPatchRestorer(radius=args.radius, channels=args.channels)
    model, trace = train_prior(data, aug_cfg, cfg, model)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    loss_csv = out.with_name(out.name + ".loss.csv")
    write_loss_trace(loss_csv, trace)
    write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "train-prior",
        _argv_of(args),
        cfg.seed,
        {"train": cfg.to_dict(), "augment": aug_cfg.to_dict(), "radius": args.radius},
        [str(data)],
        [out.name, loss_csv.name],
    )
    return 0


# ------------------------------------------------------------------ refine


def _refine_config(args, file_cfg) -> RefineConfig:
    base = {}
    if args.preset:
        base = REFINE_PRESETS[args.preset].to_dict()
    overrides = {
        "steps": args.steps,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "patch_size": args.patch_size,
        "stride": args.stride,
        "var_threshold": args.var_threshold,
        "score_threshold": args.score_threshold,
        "probe_count": args.probe_count,
        "probe_mode": args.probe_mode,
        "gate_every": args.gate_every,
        "gate_mode": args.gate_mode,
        "seed": args.seed,
    }
    merged = _merge(base, file_cfg.get("refine", {}), overrides)
    if args.metric is not None:
        handle = MetricHandle.parse(args.metric, timeout=args.metric_timeout)
        merged["metric"] = {
            "kind": handle.kind,
            "command": handle.command,
            "timeout": handle.timeout,
        }
    return RefineConfig.from_dict(merged)


def _cmd_refine(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _refine_config(args, file_cfg)
    state = TeacherStudentState.from_checkpoint(args.checkpoint)
    state, audit = refine_loop(state, args.unlabeled, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(state.teacher, out)
    audit_path = out.with_name(out.name + ".audit.jsonl")
    write_audit_log(audit_path, audit)
    if args.dump_pseudo:
        dump_pseudo_labels(state.teacher, args.unlabeled, cfg, args.dump_pseudo)
    write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "refine",
        _argv_of(args),
        cfg.seed,
        {"refine": cfg.to_dict()},
        [str(args.checkpoint), str(args.unlabeled)],
        [out.name, audit_path.name],
    )
    print(
        f"refine: {state.accepted} accepted, {state.rejected} rejected",
        file=sys.stderr,
    )
    return 0


# ------------------------------------------------------------------- infer


def _cmd_infer(args) -> int:
    model = model_from_checkpoint(args.checkpoint)
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    files = list_images(in_dir)
    if not files:
        raise NightforgeError(f"no input images in {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for src in files:
        img = load_image(src)
        if args.ensemble:
            patch, stride = args.ensemble
            n = len(tile_positions(img.shape[:2], patch, stride))
            print(f"{src.name}: ensemble over {n} patches", file=sys.stderr)
            restored = ensemble_predict(model, img, patch, stride).mean
        else:
            restored = model.predict(img)
        dst = out_dir / (src.stem + ".png")
        save_image(restored, dst)
        outputs.append(dst)
    write_manifest(
        out_dir / "manifest.json",
        "infer",
        _argv_of(args),
        None,
        {"checkpoint": str(args.checkpoint), "ensemble": args.ensemble},
        [p.name for p in files],
        [p.name for p in outputs],
    )
    return 0


# ------------------------------------------------------------------- score


def _cmd_score(args) -> int:
    metric = MetricHandle.parse(args.metric, timeout=args.metric_timeout)
    report = score_directory(metric, args.in_dir, max_workers=args.jobs)
    print("image,score")
    for name, value in report.scores:
        print(f"{name},{value!r}")
    print(f"mean,{report.mean!r}")
    return 0


# ----------------------------------------------------------------- plumbing


def _argv_of(args) -> list[str]:
    return list(getattr(args, "_argv", []))


def build_parser() -> _Parser:
    parser = _Parser(prog="nightforge", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("augment", help="synthesize degraded images")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of clear images")
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=None, help="number of outputs")
    p.add_argument("--bank", default=None, help="light map bank directory")
    p.add_argument("--severity-ratio", type=float, default=None)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("train-prior", help="self-prior training")
    p.add_argument("--data", required=True, help="directory of clear images")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="checkpoint path to write")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--preset", choices=sorted(TRAIN_PRESETS), default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--crop-size", type=int, default=None)
    p.add_argument("--loss", choices=["mse", "l1"], default=None)
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--channels", type=int, choices=[1, 3], default=3)
    p.add_argument("--bank", default=None)
    p.add_argument("--severity-ratio", type=float, default=None)
    p.set_defaults(func=_cmd_train_prior)

    p = sub.add_parser("refine", help="gated teacher-student refinement")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--unlabeled", required=True, help="directory of degraded images")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="refined checkpoint path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--preset", choices=sorted(REFINE_PRESETS), default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--var-threshold", type=float, default=None)
    p.add_argument("--score-threshold", type=float, default=None, help="accepts inf/-inf")
    p.add_argument("--probe-count", type=int, default=None)
    p.add_argument("--probe-mode", choices=["holdout", "current"], default=None)
    p.add_argument("--gate-every", type=int, default=None)
    p.add_argument("--gate-mode", choices=["difference", "sum"], default=None)
    p.add_argument("--metric", default=None, help="'contrast' or external command template")
    p.add_argument("--metric-timeout", type=float, default=60.0)
    p.add_argument("--dump-pseudo", default=None, help="directory for pseudo-label PNGs")
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("infer", help="restore a directory of images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument(
        "--ensemble",
        nargs=2,
        type=int,
        metavar=("PATCH", "STRIDE"),
        default=None,
        help="overlapping-patch ensemble mean",
    )
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("score", help="quality-score a directory of images")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--metric", default="contrast", help="'contrast' or command template")
    p.add_argument("--metric-timeout", type=float, default=60.0)
    p.add_argument("--jobs", type=int, default=1, help="external metric parallelism")
    p.set_defaults(func=_cmd_score)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = list(argv)
    try:
        return args.func(args)
    except (NightforgeError, FileNotFoundError, NotADirectoryError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"nightforge: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"nightforge: internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
