"""Audits of configs and generated datasets.

Every check returns a list of violation dicts ``{"frame", "code",
"detail"}``; an empty list means the artifact is sound.
"""

import json
from pathlib import Path

from .assemble.io import DATATYPE, iq_basenames, layout_dirs
from .assemble.batch import MANIFEST
from .errors import ConfigError
from .modulate import lookup
from .schedule import MAX_INSTANCES

MIN_SAMPLES, MAX_SAMPLES = 2000, 4_000_000
_TOL = 1e-9


def validate_config_file(path):
    from .config import load_config

    try:
        load_config(path)
    except ConfigError as exc:
        return [{"frame": None, "code": "config", "detail": str(exc)}]
    return []


def _v(out, frame, code, detail):
    out.append({"frame": frame, "code": code, "detail": detail})


def validate_frame(cfg, root, anno_path):
    """Annotation, SigMF pair(s) and their mutual consistency for one frame."""
    v = []
    name = Path(anno_path).stem
    try:
        a = json.loads(Path(anno_path).read_text())
        rx, txs = a["annotation"]["rx"], a["annotation"]["tx"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _v(v, name, "annotation-unreadable", repr(exc))
        return v
    if a.get("filePrefix") != name:
        _v(v, name, "prefix-mismatch", f"filePrefix {a.get('filePrefix')!r}")
    fs, n = rx["MasterClockRate"], rx["NumSamples"]
    if n != round(rx["TimeDuration"] * fs):
        _v(v, name, "duration-mismatch", f"{n} samples vs {rx['TimeDuration']} s")
    if not MIN_SAMPLES <= n <= MAX_SAMPLES:
        _v(v, name, "sample-count", f"{n} outside [{MIN_SAMPLES}, {MAX_SAMPLES}]")
    band = rx["ObservableBand"]
    n_inst = 0
    for k, tx in enumerate(txs):
        try:
            e = lookup(tx["ClassId"])
            if e.name != tx["ClassName"]:
                _v(v, name, "class-mismatch", f"id {tx['ClassId']} is {e.name}, not {tx['ClassName']}")
        except Exception:
            _v(v, name, "unknown-class", f"tx {k}: {tx.get('ClassId')}")
        segs = sorted(zip(tx["StartTimes"], tx["TimeDurations"]))
        n_inst += len(segs)
        for (s0, d0), (s1, _) in zip(segs, segs[1:]):
            if s1 < s0 + d0 - _TOL:
                _v(v, name, "same-tx-overlap", f"tx {k} segments overlap")
        for s, d in segs:
            if s < -_TOL or s + d > rx["TimeDuration"] + 1e-6 or d <= 0:
                _v(v, name, "event-outside-frame", f"tx {k}: [{s}, {s + d}] s")
        for lo, hi in tx["BandWidth"]:
            if tx["CarrierFrequency"] + lo < band[0] - 1e-6 or tx["CarrierFrequency"] + hi > band[1] + 1e-6:
                _v(v, name, "band-spill", f"tx {k}: carrier {tx['CarrierFrequency']} bandwidth {hi - lo}")
        snr = rx["SNRs"][k]
        if len(segs) > 1 and (not isinstance(snr, list) or len(snr) != len(segs)):
            _v(v, name, "snr-shape", f"tx {k}: {len(segs)} segments, SNRs {snr!r}")
    if n_inst > MAX_INSTANCES:
        _v(v, name, "too-many-instances", f"{n_inst} > {MAX_INSTANCES}")

    iq_dir, _ = layout_dirs(cfg, root)
    expected = [f"{b}.sigmf-data" for b in iq_basenames(name, rx["NumReceiveAntennas"])]
    if a.get("iqFiles") != expected:
        _v(v, name, "iq-files", f"expected {expected}, got {a.get('iqFiles')}")
    for data_name in expected:
        data = iq_dir / data_name
        meta = data.with_suffix(".sigmf-meta")
        if not data.exists() or not meta.exists():
            _v(v, name, "missing-iq", data_name)
            continue
        if data.stat().st_size != 8 * n:
            _v(v, name, "iq-size", f"{data_name}: {data.stat().st_size} bytes, expected {8 * n}")
        try:
            m = json.loads(meta.read_text())
            g = m["global"]
        except (ValueError, KeyError) as exc:
            _v(v, name, "meta-unreadable", f"{meta.name}: {exc!r}")
            continue
        if g.get("core:datatype") != DATATYPE:
            _v(v, name, "meta-datatype", str(g.get("core:datatype")))
        if g.get("core:sample_rate") != fs:
            _v(v, name, "meta-rate", f"{g.get('core:sample_rate')} vs {fs}")
        if len(m.get("annotations", [])) != n_inst:
            _v(v, name, "meta-annotations", f"{len(m.get('annotations', []))} vs {n_inst} instances")
        for ann in m.get("annotations", []):
            if ann["core:sample_start"] + ann["core:sample_count"] > n:
                _v(v, name, "meta-annotation-range", f"{ann['core:label']} ends past the recording")
    return v


def validate_coco(path, expected_counts=None):
    """Referential integrity and box bounds of one COCO instances file.
    ``expected_counts`` maps frame name to ground-truth signal count."""
    v = []
    try:
        c = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        return [{"frame": None, "code": "coco-unreadable", "detail": f"{path}: {exc!r}"}]
    images = {im["id"]: im for im in c.get("images", [])}
    cats = {cat["id"] for cat in c.get("categories", [])}
    if len(cats) != 100:
        _v(v, None, "coco-categories", f"{Path(path).name}: {len(cats)} categories")
    counts = {i: 0 for i in images}
    for a in c.get("annotations", []):
        im = images.get(a["image_id"])
        if im is None:
            _v(v, None, "coco-dangling", f"annotation {a['id']} -> image {a['image_id']}")
            continue
        counts[a["image_id"]] += 1
        frame = im.get("frame", im["file_name"])
        if a["category_id"] not in cats:
            _v(v, frame, "coco-category", f"annotation {a['id']}: category {a['category_id']}")
        x, y, w, h = a["bbox"]
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > im["width"] or y + h > im["height"]:
            _v(v, frame, "box-out-of-bounds", f"annotation {a['id']}: bbox {a['bbox']} in {im['width']}x{im['height']}")
    if expected_counts:
        for i, im in images.items():
            want = expected_counts.get(im.get("frame"))
            if want is not None and counts[i] != want:
                _v(v, im.get("frame"), "box-count", f"{counts[i]} boxes for {want} signals")
    return v


def validate_dataset(cfg, root):
    """Every frame, the manifest and any COCO export under ``root``."""
    root = Path(root)
    _, anno_dir = layout_dirs(cfg, root)
    files = sorted(anno_dir.glob("Frame_*.json"))
    v = []
    if not files:
        _v(v, None, "empty-dataset", f"no annotation files under {anno_dir}")
        return v
    counts = {}
    for f in files:
        v += validate_frame(cfg, root, f)
        try:
            counts[f.stem] = sum(len(t["StartTimes"]) for t in json.loads(f.read_text())["annotation"]["tx"])
        except (ValueError, KeyError, TypeError):
            pass
    man = root / MANIFEST
    if man.exists():
        m = json.loads(man.read_text())
        if m.get("total_frames") != len(files):
            _v(v, None, "manifest-total", f"manifest says {m.get('total_frames')}, found {len(files)}")
        if sum(fr["num_rx"] for fr in m.get("frames", [])) != m.get("total_frames"):
            _v(v, None, "manifest-sum", "total_frames differs from the sum of receivers per scenario")
        names = [r["name"] for r in m.get("records", [])]
        if len(set(names)) != len(names):
            _v(v, None, "manifest-duplicates", "duplicate frame names")
    for coco in sorted((root / "coco").glob("instances_*.json")):
        v += validate_coco(coco, counts)
    return v


def summarize(violations, limit=20):
    lines = [f"{x['frame'] or '-'}: {x['code']}: {x['detail']}" for x in violations[:limit]]
    if len(violations) > limit:
        lines.append(f"... {len(violations) - limit} more")
    return "\n".join(lines)
