"""Command-line interface.

Exit codes: 0 ok, 1 validation failure (or failed frames), 2 I/O error,
3 configuration error. Every command accepts ``--json-report PATH``.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, RadioForgeError

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("radioforge")


class CommandResult:
    def __init__(self, code=EXIT_OK, summary="", report=None):
        self.code = code
        self.summary = summary
        self.report = report or {}


def parse_frames(text, num_frames):
    """``A..B`` (inclusive), ``A`` or ``None`` for every frame."""
    if text is None:
        return range(num_frames)
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            a, b = int(a), int(b)
        else:
            a = b = int(text)
    except ValueError:
        raise ConfigError(f"expected A..B, got {text!r}", "--frames") from None
    if a > b or a < 0:
        raise ConfigError(f"empty or negative range {text!r}", "--frames")
    if b >= num_frames:
        raise ConfigError(f"frame {b} >= num_frames {num_frames}", "--frames")
    return range(a, b + 1)


def _config(path, seed=None, num_frames=None):
    from .config import config_from_dict, load_config

    cfg = load_config(path)
    over = {}
    if seed is not None:
        over["seed"] = seed
    if num_frames is not None:
        over["num_frames"] = num_frames
    return config_from_dict(over, base=cfg.raw) if over else cfg


def _dataset_config(dataset, path):
    """``--config`` if given, else the config archived with the dataset."""
    from .assemble.batch import CONFIG

    if path is None and (Path(dataset) / CONFIG).exists():
        path = Path(dataset) / CONFIG
    return _config(path)


# --------------------------------------------------------------------------


def cmd_generate(args):
    from .assemble import run_batch

    cfg = _config(args.config, args.seed, args.num_frames)
    frames = parse_frames(args.frames, cfg.num_frames)

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total} scenarios", end="", file=sys.stderr, flush=True)

    m = run_batch(cfg, frames, args.workers, args.out, resume=not args.no_resume, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    summary = (f"{len(frames)} scenarios -> {m['total_frames']} recorded frames in {args.out}"
               f" ({len(m['failed'])} failed)")
    report = {"scenarios": len(frames), "total_frames": m["total_frames"], "failed": m["failed"], "out": str(args.out)}
    return CommandResult(EXIT_INVALID if m["failed"] else EXIT_OK, summary, report)


def cmd_spectrogram(args):
    from PIL import Image, ImageDraw

    from .annotate import SpectrogramSpec, annotate_frame, to_image
    from .assemble.io import read_annotation, read_iq

    anno_path = Path(args.frame)
    root = anno_path.parent.parent if args.dataset is None else Path(args.dataset)
    cfg = _dataset_config(root, args.config)
    spec = SpectrogramSpec.from_config(cfg)
    if args.nfft or args.hop:
        spec = SpectrogramSpec(spec.window, args.nfft or spec.nfft, args.hop or spec.hop, "dB", spec.dynamic_range_db)
    anno = read_annotation(anno_path)
    x = read_iq(cfg, root, anno)
    if not 0 <= args.antenna < x.shape[0]:
        raise ConfigError(f"antenna {args.antenna} not in [0, {x.shape[0]})", "--antenna")
    p, boxes = annotate_frame(x[args.antenna:args.antenna + 1], anno, spec)
    img = Image.fromarray(to_image(p, spec.dynamic_range_db), mode="L")
    if args.boxes:
        img = img.convert("RGB")
        draw = ImageDraw.Draw(img)
        for b in boxes:
            draw.rectangle([b.x, b.y, b.x + b.width - 1, b.y + b.height - 1], outline=(255, 64, 64))
    out = Path(args.out or anno_path.with_suffix(".png").name)
    img.save(out)
    return CommandResult(EXIT_OK, f"wrote {out} ({p.shape[0]}x{p.shape[1]}, {len(boxes)} boxes)",
                         {"png": str(out), "boxes": [b.bbox for b in boxes]})


def cmd_coco_export(args):
    from .annotate import export_coco

    cfg = _dataset_config(args.dataset, args.config)
    s = export_coco(cfg, args.dataset, args.out, args.seed, write_images=not args.no_images)
    return CommandResult(EXIT_OK, f"{s['images']} images, {s['annotations']} boxes, splits {s['splits']} -> {s['dest']}", s)


def cmd_stats(args):
    from .assemble import dataset_stats

    cfg = _dataset_config(args.dataset, args.config)
    s = dataset_stats(cfg, args.dataset)
    if args.plots:
        _plot_stats(s, Path(args.plots))
    lines = [f"total frames (sum of receivers over scenarios): {s['total_frames']}",
             f"scenarios: {s['total_scenarios']}", f"signal instances: {s['total_instances']}",
             f"max instances per frame: {s['max_instances_per_frame']}",
             f"distinct classes: {len(s['class_histogram'])}"]
    return CommandResult(EXIT_OK, "\n".join(lines), s)


def _plot_stats(s, dest):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    dest.mkdir(parents=True, exist_ok=True)
    bars = {"classes": s["class_histogram"], "categories_per_frame": s["categories_per_frame"],
            "instances_per_frame": s["instances_per_frame"]}
    for name, h in bars.items():
        fig, ax = plt.subplots(figsize=(max(6, len(h) * 0.15), 4))
        ax.bar(list(h), list(h.values()))
        ax.tick_params(axis="x", labelrotation=90 if name == "classes" else 0, labelsize=6 if name == "classes" else 9)
        ax.set_title(name.replace("_", " "))
        fig.tight_layout()
        fig.savefig(dest / f"{name}.png", dpi=120)
        plt.close(fig)
    for name in ("duration_histogram", "bandwidth_histogram", "snr_histogram"):
        h = s.get(name)
        if not h:
            continue
        e = h["edges"]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.stairs(h["counts"], e, fill=True)
        ax.set_title(name.replace("_", " "))
        fig.tight_layout()
        fig.savefig(dest / f"{name.replace('_histogram', '')}.png", dpi=120)
        plt.close(fig)


def cmd_validate(args):
    from .validate import summarize, validate_config_file, validate_dataset

    if (args.config is None) == (args.dataset is None) and args.dataset is None:
        raise ConfigError("give --config or --dataset", "validate")
    v = []
    if args.dataset is not None:
        cfg = _dataset_config(args.dataset, args.config)
        v = validate_dataset(cfg, args.dataset)
        target = args.dataset
    else:
        v = validate_config_file(args.config)
        if v:
            return CommandResult(EXIT_CONFIG, summarize(v), {"violations": v})
        target = args.config
    if v:
        return CommandResult(EXIT_INVALID, f"{len(v)} violation(s) in {target}\n{summarize(v)}", {"violations": v})
    return CommandResult(EXIT_OK, f"{target}: no violations", {"violations": []})


def cmd_coverage(args):
    from .channel.raytrace import compute_coverage, load_osm
    from .config import load_scene

    scene = load_osm(args.osm) if Path(args.osm).exists() else load_scene(args.osm)
    grid = compute_coverage(scene, tuple(args.tx), args.spacing, args.fc, args.tx_power, args.rx_height,
                            args.max_reflections)
    out = Path(args.out)
    grid.to_png(out)
    if args.csv:
        grid.to_csv(args.csv)
    import numpy as np

    fin = np.isfinite(grid.power_dbm)
    return CommandResult(EXIT_OK, f"wrote {out} ({grid.power_dbm.shape[1]}x{grid.power_dbm.shape[0]} cells, "
                                  f"{int(grid.outage.sum())} in outage)",
                         {"png": str(out), "cells": int(grid.power_dbm.size), "outage": int(grid.outage.sum()),
                          "max_dbm": float(grid.power_dbm[fin].max()) if fin.any() else None})


def cmd_registry(args):
    from .modulate import list_registry

    rows = [e.as_dict() for e in list_registry()]
    text = "\n".join(f"{r['class_id']:3d}  {r['name']:<16} {r['family']:<7} weight {r['weight']:g}" for r in rows)
    return CommandResult(EXIT_OK, text, {"classes": rows})


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="radioforge", description="Labeled wideband RF frame synthesis")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--json-report", metavar="PATH", help="write a machine-readable report")
        sp.set_defaults(func=fn)
        return sp

    g = add("generate", cmd_generate, "generate frames (parallel)")
    g.add_argument("--config", help="JSON config merged onto the reference config")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--frames", help="inclusive scenario range A..B (default: all)")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--seed", type=int, help="override the master seed")
    g.add_argument("--num-frames", type=int, help="override num_frames")
    g.add_argument("--no-resume", action="store_true", help="regenerate frames already on disk")
    g.add_argument("--quiet", action="store_true")

    s = add("spectrogram", cmd_spectrogram, "render one frame's spectrogram")
    s.add_argument("frame", help="annotation JSON of the frame")
    s.add_argument("--dataset", help="dataset root (default: two levels above the annotation)")
    s.add_argument("--config")
    s.add_argument("--out", help="PNG path")
    s.add_argument("--antenna", type=int, default=0)
    s.add_argument("--nfft", type=int)
    s.add_argument("--hop", type=int)
    s.add_argument("--boxes", action="store_true", help="draw ground-truth boxes")

    c = add("coco-export", cmd_coco_export, "spectrogram images, COCO JSON and 8:1:1 splits")
    c.add_argument("dataset")
    c.add_argument("--out", help="destination (default: <dataset>/coco)")
    c.add_argument("--config")
    c.add_argument("--seed", type=int, help="split seed (default: config seed)")
    c.add_argument("--no-images", action="store_true")

    st = add("stats", cmd_stats, "aggregate dataset statistics")
    st.add_argument("dataset")
    st.add_argument("--config")
    st.add_argument("--plots", help="directory for histogram PNGs")

    v = add("validate", cmd_validate, "audit a config or a dataset")
    v.add_argument("--config")
    v.add_argument("--dataset")

    cv = add("coverage", cmd_coverage, "ray-traced coverage map")
    cv.add_argument("osm", help="OSM file or bundled scene name")
    cv.add_argument("--tx", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
    cv.add_argument("--spacing", type=float, default=20.0)
    cv.add_argument("--fc", type=float, default=2.4e9)
    cv.add_argument("--tx-power", type=float, default=20.0, help="dBm")
    cv.add_argument("--rx-height", type=float, default=1.5)
    cv.add_argument("--max-reflections", type=int, default=2)
    cv.add_argument("--out", required=True)
    cv.add_argument("--csv")

    add("registry", cmd_registry, "list the modulation classes")
    return p


def _write_report(path, command, result):
    data = {"command": command, "exit_code": result.code, "summary": result.summary, **result.report}
    Path(path).write_text(json.dumps(data, indent=2, default=str) + "\n")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except ConfigError as exc:
        result = CommandResult(EXIT_CONFIG, f"config error: {exc}", {"error": str(exc)})
    except OSError as exc:
        result = CommandResult(EXIT_IO, f"I/O error: {exc}", {"error": str(exc)})
    except RadioForgeError as exc:
        result = CommandResult(EXIT_INVALID, f"error: {exc}", {"error": str(exc)})
    stream = sys.stdout if result.code == EXIT_OK else sys.stderr
    if result.summary:
        print(result.summary, file=stream)
    if args.json_report:
        try:
            _write_report(args.json_report, args.command, result)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
    return result.code


if __name__ == "__main__":
    sys.exit(main())
