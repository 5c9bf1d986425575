"""``evface`` command line: simulate, encode, export, evaluate, info.

Data goes to stdout, diagnostics to stderr. Exit status is 0 on success,
1 on any reported error and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .config import PipelineConfig, parse_override
from .dataset import (
    ManifestEntry,
    export_sample,
    generate_sample,
    load_grayscale,
    load_landmarks,
    read_manifest,
    sample_seed,
    split_dataset,
    to_uint8,
    write_manifest,
)
from .errors import DataError, EvfaceError, UnknownFileTypeError
from .formats import CLASS_NAMES, read_events, read_events_csv, read_labels, write_events
from .geometry import Intrinsics, sample_trajectory
from .metrics import evaluate_files
from .representation import single_frame_config, stream_encode, window_count
from .simulator import EventStream, simulate_sequence, stream_frames

log = logging.getLogger("evface")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
SIDECAR_SUFFIX = ".frames.json"


def _resize_arg(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("resize dims must be positive")
    return [w, h]


def _common_parser(suppress: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline options")
    g.add_argument("--config", default=d, help="JSON pipeline config file")
    g.add_argument("--seed", type=int, default=d, help="global seed")
    g.add_argument("--jobs", type=int, default=d, help="parallel worker processes")
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--single-frame", dest="single_frame", action="store_const", const=True,
                      default=d, help="one TBR frame per stream (default)")
    mode.add_argument("--stream", dest="single_frame", action="store_const", const=False,
                      default=d, help="ceil(W/N) TBR frames per stream")
    g.add_argument("--resize", type=_resize_arg, default=d, metavar="WxH",
                   help="resize exported frames")
    g.add_argument("--set", dest="overrides", action="append", default=d, metavar="KEY=VALUE",
                   help="override any config key, e.g. motion.max_frames=20")
    g.add_argument("--dump-config", action="store_true", default=d,
                   help="print the effective config and exit")
    g.add_argument("-v", "--verbose", action="store_true", default=d)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evface", parents=[_common_parser(False)],
        description="Synthetic event-camera face/eye datasets from annotated still images.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")
    common = [_common_parser(True)]

    p = sub.add_parser("simulate", parents=common, help="images -> EVS1 event files")
    p.add_argument("images", nargs="+", type=Path)
    p.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory")

    p = sub.add_parser("encode", parents=common, help="EVS1/CSV events -> TBR images")
    p.add_argument("events", nargs="+", type=Path)
    p.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--dims", type=_resize_arg, metavar="WxH", help="sensor dims for CSV input")

    p = sub.add_parser("export", parents=common, help="image+landmark corpus -> labelled dataset")
    p.add_argument("corpus", type=Path)
    p.add_argument("-o", "--out", type=Path, required=False, help="dataset directory")

    p = sub.add_parser("evaluate", parents=common, help="score a prediction file against a dataset")
    p.add_argument("predictions", type=Path)
    p.add_argument("dataset", type=Path)
    p.add_argument("--split", choices=("all", "train", "val"), default="all")
    p.add_argument("--report", type=Path, help="report path (default: <predictions>.report.txt)")

    p = sub.add_parser("info", parents=common, help="summarize an EVS1, CSV, label or manifest file")
    p.add_argument("file", type=Path)
    p.add_argument("--dims", type=_resize_arg, metavar="WxH", help="sensor dims for CSV input")
    return parser


def load_config(args) -> PipelineConfig:
    overrides = [parse_override(o) for o in (getattr(args, "overrides", None) or [])]
    flags = {}
    for key in ("seed", "jobs", "single_frame", "resize"):
        v = getattr(args, key, None)
        if v is not None:
            flags[key] = v
    if flags:
        overrides.append(flags)
    return PipelineConfig.load(getattr(args, "config", None), overrides)


# -- simulate -------------------------------------------------------------


def _simulate_one(path: Path, cfg: PipelineConfig, out: Path):
    image_id = path.stem
    img = load_grayscale(path)
    height, width = img.shape
    seed = sample_seed(cfg.seed, image_id)
    motion = replace(cfg.motion, seed=seed)
    fs = stream_frames(img, sample_trajectory(motion), Intrinsics.default(width, height),
                       cfg.plane_depth, cfg.border, cfg.sim.fps)
    es = simulate_sequence(fs, cfg.sim)
    log.debug("%s: %dx%d, seed %d, %d frames, %d events", image_id, width, height, seed, len(fs), len(es))
    write_events(es, out / f"{image_id}.evs")
    sidecar = {
        "image_id": image_id,
        "width": width,
        "height": height,
        "seed": seed,
        "fps": fs.fps,
        "duration_us": es.duration,
        "timestamps_us": [int(t) for t in fs.timestamps],
        "homographies": [np.asarray(h).tolist() for h in fs.homographies],
    }
    (out / f"{image_id}{SIDECAR_SUFFIX}").write_text(json.dumps(sidecar, indent=1) + "\n")
    return image_id, len(es), es.duration


def cmd_simulate(args, cfg: PipelineConfig) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    paths = sorted(args.images, key=lambda p: p.stem)
    stems = [p.stem for p in paths]
    if len(set(stems)) != len(stems):
        raise DataError("input images share a basename")
    for image_id, n, duration in _run_jobs(_simulate_one, paths, cfg, args.out):
        print(f"{image_id}: events: {n} duration_us: {duration}")
    return 0


# -- encode ---------------------------------------------------------------


def _load_stream(path: Path, dims=None) -> EventStream:
    if path.suffix.lower() == ".csv":
        if dims is None:
            raise DataError(f"{path}: --dims WxH is required for CSV input")
        es = read_events_csv(path, dims)
    else:
        es = read_events(path)
    sidecar = path.with_name(path.stem + SIDECAR_SUFFIX)
    if sidecar.exists():
        es.duration = int(json.loads(sidecar.read_text())["duration_us"])
    return es


def cmd_encode(args, cfg: PipelineConfig) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    for path in args.events:
        es = _load_stream(path, args.dims)
        tbr = single_frame_config(es, cfg.tbr.n_bits, bit_order=cfg.tbr.bit_order,
                                  normalizer=cfg.tbr.normalizer) if cfg.single_frame else cfg.tbr
        frames = stream_encode(es, tbr)
        log.debug("%s: %d events over %d us", path, len(es), es.span)
        for k, f in enumerate(frames):
            name = path.stem if len(frames) == 1 else f"{path.stem}_{k:04d}"
            Image.fromarray(to_uint8(f.values), mode="L").save(args.out / f"{name}.png")
        print(f"{path.stem}: frames: {len(frames)} windows: {window_count(es.span, tbr.delta_t)} "
              f"delta_t_us: {tbr.delta_t} n_bits: {tbr.n_bits}")
    return 0


# -- export ---------------------------------------------------------------


def _pair_corpus(corpus: Path):
    if not corpus.is_dir():
        raise DataError(f"corpus {corpus} is not a directory")
    images = {p.stem: p for p in corpus.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES}
    marks = {p.stem: p for p in corpus.iterdir() if p.suffix.lower() == ".txt"}
    problems = [f"{s}: no landmark file" for s in sorted(set(images) - set(marks))]
    problems += [f"{s}: no image file" for s in sorted(set(marks) - set(images))]
    if problems:
        raise DataError("corpus mismatch:\n  " + "\n  ".join(problems))
    if not images:
        raise DataError(f"corpus {corpus} holds no images")
    return [(s, images[s], marks[s]) for s in sorted(images)]


def _export_one(item, cfg: PipelineConfig, out: Path):
    stem, img_path, lm_path = item
    img = load_grayscale(img_path)
    lm = load_landmarks(lm_path)
    seed = sample_seed(cfg.seed, stem)
    sample = generate_sample(
        img, lm, cfg.motion, cfg.sim, cfg.boxes, cfg.tbr, cfg.single_frame,
        plane_depth=cfg.plane_depth, border=cfg.border, seed=seed,
    )
    log.debug("%s: seed %d, %d events, %d frames, boxes %s", stem, seed, len(sample.events),
              len(sample.frames), [len(a) for a in sample.annotations])
    return export_sample(sample.frames, sample.annotations, out, stem, cfg.resize, seed, lm.image_id)


def cmd_export(args, cfg: PipelineConfig) -> int:
    items = _pair_corpus(args.corpus)
    out = args.out or Path("dataset")
    out.mkdir(parents=True, exist_ok=True)
    entries: list[ManifestEntry] = []
    for chunk in _run_jobs(_export_one, items, cfg, out):
        entries.extend(chunk)
    write_manifest(entries, out / "manifest.tsv")
    train, val = split_dataset(entries, cfg.split_ratio, cfg.seed)
    write_manifest(train, out / "train.tsv")
    write_manifest(val, out / "val.tsv")
    (out / "config.json").write_text(cfg.dump())
    print(f"samples: {len(entries)} train: {len(train)} val: {len(val)} -> {out}")
    return 0


# -- evaluate -------------------------------------------------------------


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    report = evaluate_files(args.predictions, args.dataset, cfg.eval,
                            None if args.split == "all" else args.split)
    text = report.to_text()
    sys.stdout.write(text)
    path = args.report or args.predictions.with_name(args.predictions.name + ".report.txt")
    path.write_text(text)
    path.with_suffix(".tsv").write_text(report.to_table())
    return 0


# -- info -----------------------------------------------------------------


def _sniff(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".evs":
        return "evs"
    if suffix == ".csv":
        return "csv"
    if suffix == ".tsv":
        return "manifest"
    if suffix == ".txt":
        return "labels"
    with open(path, "rb") as f:
        head = f.read(4)
    if head[:3] == b"EVS":
        return "evs"
    raise UnknownFileTypeError(f"{path}: unknown file type")


def _stream_summary(es: EventStream) -> list[str]:
    ev = es.events
    lines = [f"dims: {es.width}x{es.height}", f"events: {len(ev)}"]
    if len(ev):
        lines.append(f"time_span_us: {int(ev['t'][0])}..{int(ev['t'][-1])}")
        lines.append(f"positive: {int(ev['p'].sum())} negative: {int(len(ev) - ev['p'].sum())}")
    else:
        lines.append("time_span_us: empty")
    return lines


def cmd_info(args, cfg: PipelineConfig) -> int:
    path = args.file
    if not path.exists():
        raise DataError(f"{path}: no such file")
    kind = _sniff(path)
    if kind == "evs":
        lines = ["format: EVS1"] + _stream_summary(read_events(path))
    elif kind == "csv":
        if args.dims is None:
            raise DataError(f"{path}: --dims WxH is required for CSV input")
        lines = ["format: event CSV"] + _stream_summary(read_events_csv(path, args.dims))
    elif kind == "manifest":
        entries = read_manifest(path)
        lines = ["format: manifest", f"samples: {len(entries)}",
                 f"images: {len({e.image_id for e in entries})}"]
    else:
        boxes = read_labels(path)
        lines = ["format: labels", f"boxes: {len(boxes)}"]
        lines += [f"class {c} ({name}): {sum(b.cls == c for b in boxes)}"
                  for c, name in CLASS_NAMES.items()]
    print("\n".join(lines))
    return 0


# -- plumbing -------------------------------------------------------------


def _run_jobs(fn, items, cfg: PipelineConfig, out: Path):
    """Apply ``fn`` to each item, in input order, with up to ``cfg.jobs`` processes."""
    if cfg.jobs <= 1 or len(items) <= 1:
        return [fn(item, cfg, out) for item in items]
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        futures = [pool.submit(fn, item, cfg, out) for item in items]
        return [f.result() for f in futures]


COMMANDS = {
    "simulate": cmd_simulate,
    "encode": cmd_encode,
    "export": cmd_export,
    "evaluate": cmd_evaluate,
    "info": cmd_info,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("evface: %(levelname)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
    try:
        cfg = load_config(args)
        if getattr(args, "dump_config", False):
            sys.stdout.write(cfg.dump())
            return 0
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 2
        return COMMANDS[args.command](args, cfg)
    except (EvfaceError, OSError) as exc:
        # written directly so the diagnostic does not depend on logging setup
        print(f"evface: error: {exc}", file=sys.stderr)
        return 1
    finally:
        log.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
