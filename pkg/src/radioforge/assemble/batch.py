"""Parallel batch generation, the dataset manifest and aggregate stats.

Each frame is a pure function of (config, frame index), so the archive is
byte-identical whatever the worker count or completion order. Frames whose
files already exist are skipped, which makes an interrupted run resumable.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from ..config import sample_scenario
from ..errors import FrameError, RadioForgeError
from .frame import frame_name, generate_frame
from .io import atomic_write, dumps, frame_complete, layout_dirs, read_annotation, write_frame

log = logging.getLogger("radioforge")

MANIFEST = "manifest.json"
CONFIG = "config.json"


def worker_cap(requested):
    """``requested`` limited by ``RADIOFORGE_THREADS`` and at least 1."""
    cap = os.environ.get("RADIOFORGE_THREADS")
    n = max(1, int(requested))
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def frame_done(cfg, out, index):
    plan = sample_scenario(cfg, index)
    return all(frame_complete(cfg, out, frame_name(index, rx.rx_id), rx.n_antennas) for rx in plan.rxs)


def _produce(cfg, out, index):
    """Generate and archive one scenario; returns its receiver count."""
    frames = generate_frame(cfg, index)
    for fr in frames:
        write_frame(cfg, fr, out)
    return len(frames)


_CFG = None


def _init(cfg):
    global _CFG
    _CFG = cfg


def _task(out, index):
    try:
        return index, _produce(_CFG, out, index), None
    except (RadioForgeError, OSError, ValueError) as exc:
        return index, 0, repr(exc)


def run_batch(cfg, frames, workers=1, out=".", resume=True, progress=None):
    """Generate ``frames`` (iterable of scenario indices) into ``out``.

    Failed frames are retried once, then logged and listed in the
    manifest's ``failed`` entry. ``progress(done, total)`` is called after
    each frame. Returns the manifest dict (also written to
    ``<out>/manifest.json``).
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / CONFIG, dumps(cfg.raw))
    frames = sorted(set(int(i) for i in frames))
    for i in frames:
        if not 0 <= i < cfg.num_frames:
            raise FrameError(i, "sample", ValueError(f"index outside [0, {cfg.num_frames})"))
    todo = [i for i in frames if not (resume and frame_done(cfg, out, i))]
    skipped = len(frames) - len(todo)
    if skipped:
        log.info("skipping %d frames already on disk", skipped)
    workers = worker_cap(workers)
    failed = {}
    done = skipped
    total = len(frames)

    def report(index, err, attempt):
        nonlocal done
        if err is None:
            done += 1
            log.info("frame %d done (%d/%d)", index, done, total)
            if progress:
                progress(done, total)
        elif attempt == 0:
            log.warning("frame %d failed, retrying: %s", index, err)
        else:
            log.error("frame %d failed twice: %s", index, err)
            failed[index] = err

    if workers == 1 or len(todo) <= 1:
        _init(cfg)
        for i in todo:
            for attempt in range(2):
                _, _, err = _task(out, i)
                report(i, err, attempt)
                if err is None:
                    break
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init, initargs=(cfg,)) as pool:
            pending = {pool.submit(_task, out, i): (i, 0) for i in todo}
            while pending:
                for fut in as_completed(list(pending)):
                    i, attempt = pending.pop(fut)
                    _, _, err = fut.result()
                    report(i, err, attempt)
                    if err is not None and attempt == 0:
                        pending[pool.submit(_task, out, i)] = (i, 1)
                    break

    manifest = build_manifest(cfg, out)
    manifest["failed"] = [{"frame_index": i, "error": failed[i]} for i in sorted(failed)]
    atomic_write(out / MANIFEST, dumps(manifest))
    return manifest


def build_manifest(cfg, out):
    """Manifest of every complete frame under ``out`` (scan of the
    annotation directory, so it is independent of run history)."""
    from ..annotate import make_splits

    _, anno_dir = layout_dirs(cfg, out)
    records = []
    for path in sorted(anno_dir.glob("Frame_*.json")):
        a = read_annotation(path)
        an = a["annotation"]
        records.append({
            "name": a["filePrefix"],
            "frame_index": an["frame"]["FrameIndex"],
            "rx": int(a["filePrefix"].rsplit("_", 1)[1]),
            "iq_files": a["iqFiles"],
            "num_samples": an["rx"]["NumSamples"],
            "instances": sum(len(t["StartTimes"]) for t in an["tx"]),
        })
    by_frame = {}
    for r in records:
        by_frame.setdefault(r["frame_index"], []).append(r["name"])
    splits = None
    if len(records) >= 10:
        s = make_splits(len(records), cfg.seed)
        splits = {k: [records[i]["name"] for i in v] for k, v in s.items()}
    return {
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "frames": [{"frame_index": k, "num_rx": len(v), "files": v} for k, v in sorted(by_frame.items())],
        "records": records,
        "splits": splits,
        "total_frames": len(records),
        "total_scenarios": len(by_frame),
        "total_instances": sum(r["instances"] for r in records),
        "failed": [],
    }


def total_frames(rx_counts):
    """Recorded frames: one per receiver per scenario."""
    return int(sum(rx_counts))


def _hist(values, bins):
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def dataset_stats(cfg, out):
    """Aggregate report over the archived frames in ``out``."""
    _, anno_dir = layout_dirs(cfg, out)
    files = sorted(anno_dir.glob("Frame_*.json"))
    if not files:
        raise RadioForgeError(f"no frames under {anno_dir}")
    classes, cats_per_frame, inst_per_frame = {}, [], []
    durations, bandwidths, snrs = [], [], []
    scenarios = set()
    for path in files:
        an = read_annotation(path)["annotation"]
        scenarios.add(an["frame"]["FrameIndex"])
        ids = set()
        n = 0
        for k, tx in enumerate(an["tx"]):
            s = an["rx"]["SNRs"][k]
            s = s if isinstance(s, list) else [s]
            for seg, (d, bw) in enumerate(zip(tx["TimeDurations"], tx["BandWidth"])):
                classes[tx["ClassName"]] = classes.get(tx["ClassName"], 0) + 1
                durations.append(d)
                bandwidths.append(bw[1] - bw[0])
                if s[seg] is not None:
                    snrs.append(s[seg])
                n += 1
            ids.add(tx["ClassId"])
        cats_per_frame.append(len(ids))
        inst_per_frame.append(n)
    n_inst = sum(inst_per_frame)
    return {
        "total_frames": len(files),
        "total_scenarios": len(scenarios),
        "total_instances": n_inst,
        "class_histogram": dict(sorted(classes.items())),
        "categories_per_frame": {str(k): cats_per_frame.count(k) for k in sorted(set(cats_per_frame))},
        "instances_per_frame": {str(k): inst_per_frame.count(k) for k in sorted(set(inst_per_frame))},
        "max_instances_per_frame": max(inst_per_frame),
        "duration_histogram": _hist(durations, 20),
        "bandwidth_histogram": _hist(bandwidths, 20),
        "snr_histogram": _hist(snrs, 20) if snrs else None,
    }
