"""Command line front end.

    topdown-pose synth  --out-dir work/            # boxes.json, tensors/, annotations.json
    topdown-pose decode --boxes work/boxes.json --tensors-dir work/tensors --out-dir work/
    topdown-pose nms    --detections work/detections_raw.json --out-dir work/
    topdown-pose eval   --detections work/detections.json --annotations work/annotations.json
    topdown-pose run    --noise-sigma 5 --out-dir out/
    topdown-pose sweep  --param oks-nms --values 0.1,0.3,0.5,0.7,0.9 --out-dir out/

Settings come from ``--config`` (flat ``key = value`` file), overridden by flags.
Failures exit with status 1 and a ``[stage]`` tagged message on stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

from .errors import StageError
from .evaluation import evaluate
from .formats import load_detections, save_annotations, write_detections
from .pipeline import (
    PipelineConfig,
    _stage,
    decode_all,
    load_dataset,
    order_detections,
    parse_config_text,
    parse_crop_size,
    propose_boxes,
    run_pipeline,
    suppress,
    sweep,
    sweep_csv,
    synthesize,
)

_CONFIG_FLAGS = {f.name for f in fields(PipelineConfig)}


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline settings")
    g.add_argument("--config", help="flat key = value settings file")
    g.add_argument("--annotations", help="COCO keypoint annotation file (default: bundled synthetic set)")
    g.add_argument("--boxes", help="person proposals JSON (default: synthetic detector)")
    g.add_argument("--tensors-dir", help="directory of .tns network outputs")
    g.add_argument("--rescales", help="per-crop context factors written by synth --train-rescale")
    g.add_argument("--oracle", action="store_const", const=True, default=None,
                   help="synthesize network outputs from annotations (default unless --tensors-dir)")
    g.add_argument("--noise-flip", type=float, help="heatmap pixel flip probability")
    g.add_argument("--noise-sigma", type=float, help="offset noise std-dev, crop px")
    g.add_argument("--noise-jitter", type=float, help="box corner jitter, fraction of box size")
    g.add_argument("--noise-duplicates", type=float, help="mean duplicate boxes per image")
    g.add_argument("--radius", type=float, help="disk radius R, crop px (default 25)")
    g.add_argument("--crop-size", help="WIDTHxHEIGHT (default 257x353)")
    g.add_argument("--rescale", type=float, help="context factor around each box (default 1.25)")
    g.add_argument("--proposal-threshold", type=float, help="keep boxes scoring above this (default 0.3)")
    g.add_argument("--iou-nms", type=float, help="box NMS IoU threshold (default 0.6)")
    g.add_argument("--oks-nms", type=float, help="pose NMS OKS threshold (default 0.5)")
    g.add_argument("--max-dets", type=int, help="detections per image scored (default 20)")
    g.add_argument("--scoring", choices=["keypoint", "box"], help="instance score source")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int, help="decode worker threads")
    g.add_argument("--out-dir")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="topdown-pose", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write proposals and oracle/noisy tensors")
    p.add_argument("--train-rescale", action="store_true",
                   help="draw each crop's context factor from [1.0, 1.5]")
    sub.add_parser("decode", parents=[common], help="tensors -> raw detections")
    p = sub.add_parser("nms", parents=[common], help="detections -> OKS-suppressed detections")
    p.add_argument("--detections", required=True)
    p = sub.add_parser("eval", parents=[common], help="detections + annotations -> AP/AR report")
    p.add_argument("--detections", required=True)
    sub.add_parser("run", parents=[common], help="end-to-end cascade")
    p = sub.add_parser("sweep", parents=[common], help="AP/AR over values of one parameter -> CSV")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, type=_float_list)
    p.add_argument("--seeds", type=_int_list, help="average over these seeds (default: --seed)")
    return parser


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    for name, value in vars(args).items():
        if value is None:
            continue
        if name == "crop_size":
            overrides["crop_width"], overrides["crop_height"] = parse_crop_size(value)
        elif name in _CONFIG_FLAGS:
            overrides[name] = value
    values = parse_config_text(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    values.update(overrides)
    # tensor files, when given, replace the oracle unless it is asked for explicitly
    if values.get("tensors_dir") and "oracle" not in values:
        values["oracle"] = False
    return PipelineConfig(**values)


def _require_out(cfg: PipelineConfig, command: str) -> Path:
    if cfg.out_dir is None:
        raise StageError("config", f"{command} needs --out-dir")
    return Path(cfg.out_dir)


def _cmd_synth(cfg: PipelineConfig, args) -> None:
    out = _require_out(cfg, "synth")
    aset = load_dataset(cfg)
    paths = synthesize(cfg, out, train_rescale=args.train_rescale, annotations=aset)
    with _stage("write"):
        save_annotations(aset, out / "annotations.json")
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    print(f"annotations: {out / 'annotations.json'}")


def _cmd_decode(cfg: PipelineConfig, args) -> None:
    out = _require_out(cfg, "decode")
    aset = load_dataset(cfg) if (cfg.oracle or cfg.annotations is not None or cfg.boxes is None) else None
    boxes = propose_boxes(cfg, aset)
    dets = order_detections(decode_all(cfg, boxes, aset))
    path = out / "detections_raw.json"
    with _stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        write_detections(dets, path)
    print(f"{len(dets)} detections -> {path}")


def _read_dets(args):
    with _stage("detections"):
        return load_detections(args.detections)


def _cmd_nms(cfg: PipelineConfig, args) -> None:
    out = _require_out(cfg, "nms")
    dets = suppress(cfg, _read_dets(args))
    path = out / "detections.json"
    with _stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        write_detections(dets, path)
    print(f"{len(dets)} detections -> {path}")


def _cmd_eval(cfg: PipelineConfig, args) -> None:
    dets = _read_dets(args)
    aset = load_dataset(cfg)
    with _stage("eval"):
        report = evaluate(dets, aset.poses, cfg.eval_params())
    print(report.format_table(), end="")
    if cfg.out_dir is not None:
        with _stage("write"):
            out = Path(cfg.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.txt").write_text(report.format_table(), encoding="utf-8")
            (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")


def _cmd_run(cfg: PipelineConfig, args) -> None:
    result = run_pipeline(cfg)
    print(result.report.format_table(), end="")
    for name, path in sorted(result.artifacts.items()):
        print(f"{name}: {path}")


def _cmd_sweep(cfg: PipelineConfig, args) -> None:
    with _stage("sweep"):
        rows = sweep(cfg, args.param, args.values, seeds=args.seeds)
        text = sweep_csv(rows)
    if cfg.out_dir is None:
        print(text, end="")
        return
    path = Path(cfg.out_dir) / "sweep.csv"
    with _stage("write"):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    print(text, end="")
    print(f"-> {path}")


COMMANDS = {
    "synth": _cmd_synth,
    "decode": _cmd_decode,
    "nms": _cmd_nms,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _stage("config"):
            cfg = config_from_args(args)
        COMMANDS[args.command](cfg, args)
    except StageError as exc:
        print(f"topdown-pose {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
