"""On-disk layout: SigMF recordings plus one annotation JSON per frame.

``<out>/sequence_data/iq/<name>.sigmf-data`` / ``.sigmf-meta`` hold the
interleaved cf32_le samples; receivers with several antennas get one pair
per antenna, suffixed ``_ant1``, ``_ant2``... ``<out>/anno/<name>.json``
holds the annotation and is written last, so its presence marks a
complete frame. Every file is written to a temporary name and renamed.
"""

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..errors import RadioForgeError

SIGMF_VERSION = "1.2.0"
DATATYPE = "cf32_le"


class ArchiveError(RadioForgeError, OSError):
    """A frame file could not be written or read."""


def layout_dirs(cfg, out):
    o = cfg.section("output")
    return Path(out) / o["iq_dir"], Path(out) / o["anno_dir"]


def iq_basenames(name, n_antennas):
    if n_antennas == 1:
        return [name]
    return [f"{name}_ant{k + 1}" for k in range(n_antennas)]


def atomic_write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def dumps(obj):
    """Canonical JSON used for every metadata file."""
    return (json.dumps(obj, indent=2, allow_nan=False) + "\n").encode()


def sigmf_meta(cfg, frame, antenna):
    fc = cfg.carrier_frequency
    fs = frame.sample_rate
    annotations = []
    for t in sorted(frame.truth, key=lambda t: (round(t.start * fs), t.tx_id, t.segment)):
        s0 = int(round(t.start * fs))
        annotations.append({
            "core:sample_start": s0,
            "core:sample_count": int(round(t.duration * fs)),
            "core:freq_lower_edge": fc + t.carrier - t.bandwidth / 2,
            "core:freq_upper_edge": fc + t.carrier + t.bandwidth / 2,
            "core:label": t.class_name,
            "radioforge:class_id": t.class_id,
            "radioforge:tx_id": t.tx_id,
            "radioforge:segment": t.segment,
            "radioforge:snr_db": t.snr_per_antenna[antenna],
        })
    return {
        "global": {
            "core:datatype": DATATYPE,
            "core:sample_rate": fs,
            "core:version": SIGMF_VERSION,
            "core:num_channels": 1,
            "core:recorder": "radioforge",
            "core:extensions": [{"name": "radioforge", "version": "1.0.0", "optional": True}],
            "core:description": f"{frame.name} antenna {antenna + 1} of {frame.samples.shape[0]}",
            "radioforge:frame_index": frame.frame_index,
            "radioforge:rx_id": frame.rx_id,
            "radioforge:antenna": antenna,
        },
        "captures": [{"core:sample_start": 0, "core:frequency": fc + cfg.band_center}],
        "annotations": annotations,
    }


def write_frame(cfg, frame, out):
    """Archive one ReceiverFrame; returns the annotation path."""
    iq_dir, anno_dir = layout_dirs(cfg, out)
    names = iq_basenames(frame.name, frame.samples.shape[0])
    anno = dict(frame.annotation)
    anno["iqFiles"] = [f"{n}.sigmf-data" for n in names]
    try:
        for k, base in enumerate(names):
            data = np.ascontiguousarray(frame.samples[k], dtype="<c8").tobytes()
            atomic_write(iq_dir / f"{base}.sigmf-data", data)
            atomic_write(iq_dir / f"{base}.sigmf-meta", dumps(sigmf_meta(cfg, frame, k)))
        path = anno_dir / f"{frame.name}.json"
        atomic_write(path, dumps(anno))
    except OSError as exc:
        raise ArchiveError(f"frame {frame.frame_index}: cannot write {frame.name}: {exc}") from exc
    return path


def read_annotation(path):
    with open(path) as f:
        return json.load(f)


def read_iq(cfg, out, anno):
    """(n_antennas, n) complex64 samples for an annotation dict."""
    iq_dir, _ = layout_dirs(cfg, out)
    rows = [np.fromfile(iq_dir / name, dtype="<c8") for name in anno["iqFiles"]]
    return np.stack(rows) if rows else np.zeros((0, 0), np.complex64)


def frame_complete(cfg, out, name, n_antennas):
    iq_dir, anno_dir = layout_dirs(cfg, out)
    if not (anno_dir / f"{name}.json").exists():
        return False
    return all((iq_dir / f"{b}.sigmf-{s}").exists() for b in iq_basenames(name, n_antennas) for s in ("data", "meta"))
