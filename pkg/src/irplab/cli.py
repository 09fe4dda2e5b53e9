"""Command-line pipeline: gen, label, train, predict, eval, filter, recommend, sweep."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import apps, formats, restore, scenes
from .config import ConfigError, RunConfig, load_config
from .imaging import ExposureConfig
from .predictor import IrpPredictor, PredictorConfig, load_model, predict_irp, save_model, train
from .restore import read_labels_csv, write_labels_csv
from .scenes import default_exposure_ladder, generate_procedural_scene, load_manifest


class PipelineError(RuntimeError):
    pass


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise PipelineError(f"bad --size {text!r}, expected WxH") from exc


def _ladder(cfg: RunConfig) -> list[ExposureConfig]:
    return default_exposure_ladder(
        n=cfg.ladder_len,
        t_min=cfg.t_min,
        t_max=cfg.t_max,
        full_well=cfg.full_well,
        read_sigma=cfg.read_sigma,
        gamma=cfg.gamma,
        m_max=cfg.m_max,
    )


def _predictor_config(cfg: RunConfig, args) -> PredictorConfig:
    return PredictorConfig(
        channels=cfg.channels,
        squeeze_ratio=cfg.squeeze_ratio,
        fusion_repeats=cfg.fusion_repeats,
        use_illumination=not getattr(args, "no_illum", False),
        use_noise=not getattr(args, "no_noise", False),
        use_blur=not getattr(args, "no_blur", False),
        fusion_mode="plain-sum" if getattr(args, "plain_fusion", False) else "selective",
        crop=cfg.crop,
        gamma=cfg.gamma,
        m_max=cfg.m_max,
    )


def cmd_gen(args) -> int:
    cfg = load_config(args.config)
    width, height = _parse_size(args.size) if args.size else (cfg.width, cfg.height)
    scenes.generate_dataset(
        args.out,
        n_scenes=args.scenes if args.scenes is not None else cfg.scenes,
        width=width,
        height=height,
        seed=args.seed if args.seed is not None else cfg.seed,
        ladder=_ladder(cfg),
        flow_cap=cfg.flow_cap,
    )
    print(f"wrote dataset to {args.out}")
    return 0


def cmd_label(args) -> int:
    manifest = load_manifest(args.manifest)
    root = Path(args.manifest).parent
    splits = tuple(args.splits.split(","))
    records, _ = restore.label_dataset(manifest, root, splits=splits)
    write_labels_csv(records, args.out)
    print(f"wrote {len(records)} labels to {args.out}")
    return 0


def _labeled_split(manifest, root, labels, split, crop=None):
    label_map = {(r.scene_id, r.exposure_index): r.final_irp for r in labels}
    pairs = []
    for scene in manifest.scenes:
        if scene["split"] != split:
            continue
        for cap in scene["captures"]:
            key = (scene["scene_id"], cap["exposure_index"])
            if key not in label_map:
                raise PipelineError(f"labels missing for {key[0]} exposure {key[1]}")
            img = formats.read_capture(root / cap["path"])
            pairs.append((img, label_map[key]))
    return pairs


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    manifest = load_manifest(args.manifest)
    root = Path(args.manifest).parent
    labels = read_labels_csv(args.labels)
    train_set = _labeled_split(manifest, root, labels, "train")
    val_set = _labeled_split(manifest, root, labels, "val")
    if not train_set:
        raise PipelineError("training split is empty")
    result = train(
        train_set,
        val_set,
        _predictor_config(cfg, args),
        lr=args.lr if args.lr is not None else cfg.lr,
        epochs=args.epochs if args.epochs is not None else cfg.epochs,
        batch=args.batch if args.batch is not None else cfg.batch,
        seed=args.seed if args.seed is not None else cfg.seed,
    )
    save_model(result.model, args.out)
    print(
        f"trained {len(result.train_losses)} epochs, "
        f"best val L1 {min(result.val_losses):.6f} at epoch {result.best_epoch}, "
        f"model saved to {args.out}"
    )
    return 0


def cmd_predict(args) -> int:
    if not Path(args.model).exists():
        raise PipelineError(f"model file not found: {args.model}")
    if not Path(args.image).exists():
        raise PipelineError(f"image file not found: {args.image}")
    model = load_model(args.model)
    img = formats.read_capture(args.image)
    print(f"{predict_irp(img, model):.6f}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    manifest = load_manifest(args.manifest)
    root = Path(args.manifest).parent
    labels = read_labels_csv(args.labels)
    model = load_model(args.model)
    predictions = {}
    for scene in manifest.scenes:
        if scene["split"] != args.split:
            continue
        for cap in scene["captures"]:
            img = formats.read_capture(root / cap["path"])
            predictions[(scene["scene_id"], cap["exposure_index"])] = predict_irp(img, model)
    report = apps.evaluate(predictions, labels, manifest, split=args.split)
    apps.write_eval_csv(report, args.out)
    print(
        f"scene-average SRCC {report.scene_avg_srcc:.4f} PLCC {report.scene_avg_plcc:.4f} | "
        f"overall SRCC {report.overall_srcc:.4f} PLCC {report.overall_plcc:.4f}"
    )
    return 0


def cmd_filter(args) -> int:
    model = load_model(args.model) if args.model else None
    seed = args.seed if args.seed is not None else 0
    groups = apps.make_synthetic_groups(args.groups, model, seed, size=args.size)
    result = apps.filter_frames(groups)
    apps.write_filter_csv(groups, result, args.out)
    print(
        f"accuracy {result.accuracy:.3f}, selected PSNR {result.mean_selected_psnr:.3f} dB "
        f"vs all-frames {result.mean_all_psnr:.3f} dB"
    )
    return 0


def cmd_recommend(args) -> int:
    cfg = load_config(args.config)
    model = load_model(args.model)
    frame, flow = generate_procedural_scene(args.scene_seed, cfg.width, cfg.height, cfg.flow_cap)
    idx = apps.recommend_exposure(frame, flow, _ladder(cfg), model, args.seed if args.seed is not None else 0)
    print(f"recommended exposure index {idx}")
    return 0


def cmd_sweep(args) -> int:
    rows = apps.degradation_sweep(
        args.axis, n_levels=args.levels, seeds=tuple(range(args.seeds)), size=args.size
    )
    apps.write_sweep_csv(rows, args.axis, args.out)
    for severity, irp in rows:
        print(f"severity {severity:.3f} -> IRP {irp:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irp-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1, help="worker parallelism (results are identical for any value)")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--scenes", type=int, default=None)
    p.add_argument("--size", default=None, help="WxH, e.g. 64x64")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("label", help="fit restorers and write IRP labels")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--splits", default="train,val,test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="train the predictor")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--no-illum", action="store_true")
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--no-blur", action="store_true")
    p.add_argument("--plain-fusion", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score one image")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="correlation report on a split")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("filter", help="best-frame filtering on synthetic groups")
    common(p)
    p.add_argument("--model", default=None)
    p.add_argument("--groups", type=int, default=20)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("recommend", help="pick the best exposure for a scene")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--scene-seed", type=int, default=0)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("sweep", help="oracle IRP along one degradation axis")
    common(p)
    p.add_argument("--axis", choices=("illumination", "blur", "noise"), required=True)
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--seeds", type=int, default=8)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PipelineError, ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
