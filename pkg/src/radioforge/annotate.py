"""Spectrograms, spectrogram-space boxes, COCO export and dataset splits.

Image geometry: the STFT is centred (the frame is zero-padded by nfft/2 on
both sides), so column ``k`` is the window centred on sample ``k * hop``.
An ``n``-sample frame gives ``ceil(n / hop)`` columns, all centred inside
the frame. Rows run from the highest frequency (row 0) to the lowest, with
``nfft`` bins across the master clock span centred on the band centre.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.signal import get_window

from .errors import AnnotationError
from .modulate import list_registry

WINDOWS = ("hamming", "hann", "blackman")


@dataclass(frozen=True)
class SpectrogramSpec:
    window: str = "hamming"
    nfft: int = 1024
    hop: int = 256
    scale: str = "dB"
    dynamic_range_db: float = 80.0

    def __post_init__(self):
        if self.window not in WINDOWS:
            raise AnnotationError(f"window must be one of {WINDOWS}")
        if self.nfft < 2 or self.nfft & (self.nfft - 1):
            raise AnnotationError(f"FFT size {self.nfft} is not a power of 2")
        if not 1 <= self.hop <= self.nfft:
            raise AnnotationError(f"hop {self.hop} outside [1, {self.nfft}]")
        if self.scale not in ("dB", "linear"):
            raise AnnotationError("scale must be 'dB' or 'linear'")

    @classmethod
    def from_config(cls, cfg):
        s = cfg.section("spectrogram")
        return cls(s["window"], s["nfft"], s["hop"], "dB", s["dynamic_range_db"])

    def taps(self):
        return get_window(self.window, self.nfft, fftbins=True)

    def n_columns(self, n_samples):
        return -(-n_samples // self.hop)


@dataclass(frozen=True)
class CocoBox:
    category_id: int
    x: int
    y: int
    width: int
    height: int
    snr_db: float | None = None
    tx_id: int = 0
    segment: int = 0

    @property
    def bbox(self):
        return [self.x, self.y, self.width, self.height]


def stft_power(x, spec):
    """|STFT|^2, shape (nfft, columns), row 0 = highest frequency."""
    x = np.asarray(x).ravel()
    if x.size < spec.nfft:
        raise AnnotationError(f"frame of {x.size} samples is shorter than one {spec.nfft}-point window")
    half = spec.nfft // 2
    xp = np.concatenate([np.zeros(half, x.dtype), x, np.zeros(half, x.dtype)])
    n_cols = spec.n_columns(x.size)
    idx = np.arange(n_cols)[:, None] * spec.hop + np.arange(spec.nfft)[None, :]
    w = spec.taps()
    out = np.empty((spec.nfft, n_cols))
    block = max(1, (1 << 22) // spec.nfft)
    for c0 in range(0, n_cols, block):
        seg = xp[idx[c0:c0 + block]] * w
        X = np.fft.fftshift(np.fft.fft(seg, axis=1), axes=1)
        out[:, c0:c0 + block] = (np.abs(X) ** 2).T[::-1]
    return out


def stft_spectrogram(x, spec):
    """Magnitude spectrogram (linear or dB per ``spec.scale``)."""
    p = stft_power(x, spec)
    if spec.scale == "linear":
        return np.sqrt(p)
    with np.errstate(divide="ignore"):
        return 10 * np.log10(p)


def to_image(p, dynamic_range_db=80.0):
    """8-bit grayscale of a power spectrogram: dB clipped to
    [peak - range, peak], linear map to 0..255."""
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(p)
    if not np.isfinite(db).any():
        return np.zeros(p.shape, np.uint8)
    top = db[np.isfinite(db)].max()
    v = np.clip((np.nan_to_num(db, neginf=top - dynamic_range_db) - (top - dynamic_range_db)) / dynamic_range_db, 0, 1)
    return np.round(v * 255).astype(np.uint8)


def frequency_row(f, fs, nfft):
    """Continuous bin coordinate of frequency ``f`` (relative to the band
    centre) counted from the lowest bin."""
    return f * nfft / fs + nfft / 2


def events_to_bboxes(events, n_samples, fs, spec, center=0.0):
    """One CocoBox per event dict (``start``, ``duration``, ``carrier``,
    ``bandwidth``, ``class_id``, optional ``snr_db``/``tx_id``/``segment``)."""
    n_cols = spec.n_columns(n_samples)
    duration = n_samples / fs
    boxes = []
    for e in events:
        t_l, t_r = e["start"], e["start"] + e["duration"]
        if t_l < -1e-12 or t_r > duration + 1e-9 or e["duration"] <= 0:
            raise AnnotationError(f"event [{t_l}, {t_r}] s outside frame of {duration} s")
        x = int(math.floor(t_l * fs / spec.hop + 1e-9))
        right = min(n_cols, int(math.ceil(t_r * fs / spec.hop - 1e-9)))
        width = max(1, right - x)
        f_lo = e["carrier"] - center - e["bandwidth"] / 2
        f_hi = e["carrier"] - center + e["bandwidth"] / 2
        lo = max(0, int(math.floor(frequency_row(f_lo, fs, spec.nfft))) - 1)
        hi = min(spec.nfft - 1, int(math.ceil(frequency_row(f_hi, fs, spec.nfft))) + 1)
        if hi < 0 or lo > spec.nfft - 1:
            raise AnnotationError(f"event band [{f_lo}, {f_hi}] Hz outside the captured span")
        y = spec.nfft - 1 - hi
        boxes.append(CocoBox(int(e["class_id"]), x, y, width, max(1, hi - lo + 1), e.get("snr_db"),
                             int(e.get("tx_id", 0)), int(e.get("segment", 0))))
    return boxes


def events_from_annotation(anno):
    """Flatten an annotation JSON into event dicts (one per segment)."""
    a = anno["annotation"]
    out = []
    for k, tx in enumerate(a["tx"]):
        snrs = a["rx"]["SNRs"][k]
        snrs = snrs if isinstance(snrs, list) else [snrs]
        for s, (t0, d, bw) in enumerate(zip(tx["StartTimes"], tx["TimeDurations"], tx["BandWidth"])):
            out.append({"tx_id": tx["TxIndex"], "segment": s, "class_id": tx["ClassId"], "class_name": tx["ClassName"],
                        "start": t0, "duration": d, "carrier": tx["CarrierFrequency"],
                        "bandwidth": bw[1] - bw[0], "snr_db": snrs[s]})
    return out


def box_iou(a, b):
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    iw = max(0, min(ax0 + aw, bx0 + bw) - max(ax0, bx0))
    ih = max(0, min(ay0 + ah, by0 + bh) - max(ay0, by0))
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union else 0.0


def energy_box(p, box, threshold_db=20.0, smooth=(3, 9)):
    """Oracle box from the spectrogram energy around ``box``.

    The power image is smoothed (frequency x time moving average) to tame
    the per-pixel fluctuation of noise-like signals, then masked at
    ``threshold_db`` below the peak inside the box. The oracle is the
    bounding box of the mask's connected components that touch the box,
    searched within the box grown by half its size.
    """
    x, y, w, h = box
    H, W = p.shape
    gx, gy = max(2, w // 2), max(2, h // 2)
    r0, r1 = max(0, y - gy), min(H, y + h + gy)
    c0, c1 = max(0, x - gx), min(W, x + w + gx)
    region = ndimage.uniform_filter(p[r0:r1, c0:c1], size=smooth, mode="nearest")
    inside = region[y - r0:y - r0 + h, x - c0:x - c0 + w]
    peak = inside.max()
    if peak <= 0:
        return None
    mask = region >= peak * 10 ** (-threshold_db / 10)
    lab, _ = ndimage.label(mask)
    keep = np.unique(lab[y - r0:y - r0 + h, x - c0:x - c0 + w])
    keep = keep[keep > 0]
    rows, cols = np.nonzero(np.isin(lab, keep))
    if rows.size == 0:
        return None
    return [int(cols.min() + c0), int(rows.min() + r0), int(cols.max() - cols.min() + 1), int(rows.max() - rows.min() + 1)]


def make_splits(n, seed):
    """Deterministic shuffled 8:1:1 partition of ``range(n)``.

    val and test get ``n // 10`` each and train the rest, so the n mod 10
    remainder goes to train. Returns ``{"train", "val", "test"}`` sorted lists.
    """
    if n < 10:
        raise AnnotationError(f"need at least 10 frames to split, got {n}")
    perm = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0x5B11,))).permutation(n)
    k = n // 10
    return {"train": sorted(int(i) for i in perm[2 * k:]),
            "val": sorted(int(i) for i in perm[:k]),
            "test": sorted(int(i) for i in perm[k:2 * k])}


def coco_categories():
    return [{"id": e.class_id, "name": e.name, "supercategory": e.family} for e in list_registry()]


def annotate_frame(samples, anno, spec):
    """(power spectrogram of antenna 0, boxes) for one archived frame."""
    rx = anno["annotation"]["rx"]
    fs = rx["MasterClockRate"]
    center = (rx["ObservableBand"][0] + rx["ObservableBand"][1]) / 2
    p = stft_power(samples[0], spec)
    return p, events_to_bboxes(events_from_annotation(anno), samples.shape[1], fs, spec, center)


def _write_json(path, obj):
    from .assemble.io import atomic_write

    atomic_write(path, (json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n").encode())


def export_coco(cfg, dataset, dest=None, seed=None, spec=None, write_images=True):
    """Spectrogram PNGs plus ``instances_<split>.json`` for every split.

    Image ids follow the sorted frame-name order (1-based); the split files
    ``<split>.txt`` list those frames' 0-based positions. Returns a summary
    dict.
    """
    from PIL import Image

    from .assemble.io import atomic_write, layout_dirs, read_annotation, read_iq

    dataset = Path(dataset)
    dest = Path(dest) if dest else dataset / "coco"
    spec = spec or SpectrogramSpec.from_config(cfg)
    seed = cfg.seed if seed is None else seed
    _, anno_dir = layout_dirs(cfg, dataset)
    files = sorted(anno_dir.glob("Frame_*.json"))
    if not files:
        raise AnnotationError(f"no annotation files under {anno_dir}")
    images, annotations = [], []
    for i, path in enumerate(files):
        anno = read_annotation(path)
        x = read_iq(cfg, dataset, anno)
        if x.size == 0:
            raise AnnotationError(f"{path.name}: missing IQ recording")
        p, boxes = annotate_frame(x, anno, spec)
        name = anno["filePrefix"]
        if write_images:
            buf = _png_bytes(Image.fromarray(to_image(p, spec.dynamic_range_db), mode="L"))
            atomic_write(dest / "images" / f"{name}.png", buf)
        images.append({"id": i + 1, "file_name": f"images/{name}.png", "width": p.shape[1], "height": p.shape[0],
                       "frame": name})
        for b in boxes:
            annotations.append({"id": len(annotations) + 1, "image_id": i + 1, "category_id": b.category_id,
                                "bbox": b.bbox, "area": b.width * b.height, "iscrowd": 0, "snr_db": b.snr_db,
                                "tx_id": b.tx_id, "segment": b.segment})
    splits = make_splits(len(images), seed)
    cats = coco_categories()
    info = {"description": "radioforge spectrogram detection set", "version": "1.0"}
    for name, idx in splits.items():
        ids = {images[k]["id"] for k in idx}
        _write_json(dest / f"instances_{name}.json", {
            "info": info, "images": [im for im in images if im["id"] in ids],
            "annotations": [a for a in annotations if a["image_id"] in ids], "categories": cats})
        atomic_write(dest / f"{name}.txt", "".join(f"{k}\n" for k in idx).encode())
    return {"images": len(images), "annotations": len(annotations),
            "splits": {k: len(v) for k, v in splits.items()}, "dest": str(dest)}


def _png_bytes(img):
    import io

    b = io.BytesIO()
    img.save(b, format="PNG", optimize=False)
    return b.getvalue()
