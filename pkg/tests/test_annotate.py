import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import clean_config
from radioforge.annotate import (
    SpectrogramSpec,
    annotate_frame,
    box_iou,
    coco_categories,
    energy_box,
    events_to_bboxes,
    export_coco,
    make_splits,
    stft_power,
    stft_spectrogram,
    to_image,
)
from radioforge.assemble import run_batch
from radioforge.errors import AnnotationError
from radioforge.validate import validate_coco, validate_dataset

SPEC = SpectrogramSpec()
FS = 2.4e6


def test_spec_validation():
    with pytest.raises(AnnotationError):
        SpectrogramSpec(nfft=1000)
    with pytest.raises(AnnotationError):
        SpectrogramSpec(hop=2048)
    with pytest.raises(AnnotationError):
        SpectrogramSpec(window="kaiser")


def test_tone_at_band_center_single_row():
    x = np.ones(50_000, complex)
    p = stft_power(x, SPEC)
    interior = p[:, 4:-4]
    rows = np.argmax(interior, axis=0)
    assert np.all(rows == SPEC.nfft // 2 - 1)
    # everything outside the main lobe is far below the peak
    col = interior[:, 0]
    lobe = np.abs(np.arange(SPEC.nfft) - (SPEC.nfft // 2 - 1)) <= 2
    assert col[~lobe].max() < 1e-6 * col.max()


def test_tone_row_tracks_frequency():
    f = 150e3
    x = np.exp(2j * np.pi * f * np.arange(40_000) / FS)
    p = stft_power(x, SPEC)
    bin_from_low = f * SPEC.nfft / FS + SPEC.nfft / 2
    assert np.argmax(p[:, 10]) == SPEC.nfft - 1 - round(bin_from_low)


@pytest.mark.parametrize("window", ["hamming", "hann", "blackman"])
def test_parseval(window):
    spec = SpectrogramSpec(window=window)
    rng = np.random.default_rng(0)
    x = rng.normal(size=200_000) + 1j * rng.normal(size=200_000)
    p = stft_power(x, spec)
    w = spec.taps()
    est = p.sum() / (spec.nfft * np.sum(w ** 2) / spec.hop)
    assert est == pytest.approx(np.sum(np.abs(x) ** 2), rel=0.01)


def test_zeros_and_short_input():
    assert not np.any(stft_power(np.zeros(5000, complex), SPEC))
    assert not np.any(to_image(stft_power(np.zeros(5000, complex), SPEC)))
    with pytest.raises(AnnotationError):
        stft_power(np.zeros(100, complex), SPEC)


def test_spectrogram_shape_and_scales():
    x = np.random.default_rng(1).normal(size=10_000) + 0j
    db = stft_spectrogram(x, SPEC)
    lin = stft_spectrogram(x, SpectrogramSpec(scale="linear"))
    assert db.shape == lin.shape == (SPEC.nfft, math.ceil(10_000 / SPEC.hop))
    assert np.allclose(db, 20 * np.log10(lin))


def test_image_dynamic_range():
    p = np.array([[1.0, 1e-4, 1e-9, 0.0]])
    img = to_image(p, 80.0)
    assert img.dtype == np.uint8
    assert list(img[0]) == [255, round(255 * 0.5), 0, 0]


# --- boxes --------------------------------------------------------------


def ev(start, dur, carrier, bw, cid=7):
    return {"start": start, "duration": dur, "carrier": carrier, "bandwidth": bw, "class_id": cid}


def test_full_frame_full_band_is_full_image():
    n = 100 * SPEC.hop
    (b,) = events_to_bboxes([ev(0.0, n / FS, 0.0, FS)], n, FS, SPEC)
    assert b.bbox == [0, 0, SPEC.n_columns(n), SPEC.nfft]
    n = 100 * SPEC.hop + 17
    (b,) = events_to_bboxes([ev(0.0, n / FS, 0.0, FS)], n, FS, SPEC)
    assert b.bbox == [0, 0, SPEC.n_columns(n), SPEC.nfft]


def test_known_start_column():
    fs = 1.11e6
    (b,) = events_to_bboxes([ev(0.017, 0.01, 0.0, 50e3)], int(0.05 * fs), fs, SPEC)
    assert b.x == math.floor(0.017 * fs / SPEC.hop) == 73
    assert b.width == math.ceil(0.027 * fs / SPEC.hop) - b.x


def test_band_center_offset():
    n = 60_000
    a = events_to_bboxes([ev(0.001, 0.005, 400e3, 60e3)], n, FS, SPEC, center=300e3)[0]
    b = events_to_bboxes([ev(0.001, 0.005, 100e3, 60e3)], n, FS, SPEC)[0]
    assert a.bbox == b.bbox


def test_box_padded_one_bin():
    (b,) = events_to_bboxes([ev(0.0, 0.01, 0.0, 24e3)], 50_000, FS, SPEC)
    # 24 kHz at 2343.75 Hz/bin: edges at bins 506.88 and 517.12 from the bottom
    lo, hi = math.floor(512 - 5.12) - 1, math.ceil(512 + 5.12) + 1
    assert b.height == hi - lo + 1 and b.y == SPEC.nfft - 1 - hi


def test_event_outside_frame():
    with pytest.raises(AnnotationError):
        events_to_bboxes([ev(0.02, 0.01, 0.0, 10e3)], 48_000, FS, SPEC)
    with pytest.raises(AnnotationError):
        events_to_bboxes([ev(-0.001, 0.01, 0.0, 10e3)], 48_000, FS, SPEC)


@settings(max_examples=200, deadline=None)
@given(st.integers(3000, 400_000), st.floats(0, 1), st.floats(0.001, 1), st.floats(-1, 1), st.floats(1e3, 1.2e6))
def test_boxes_in_bounds(n, a, b, c, bw):
    dur = n / FS
    start = a * dur * 0.999
    d = max(1 / FS, b * (dur - start))
    (box,) = events_to_bboxes([ev(start, d, c * 1.2e6, bw)], n, FS, SPEC)
    assert box.width >= 1 and box.height >= 1
    assert 0 <= box.x and box.x + box.width <= SPEC.n_columns(n)
    assert 0 <= box.y and box.y + box.height <= SPEC.nfft


def test_iou():
    assert box_iou([0, 0, 10, 10], [0, 0, 10, 10]) == 1.0
    assert box_iou([0, 0, 10, 10], [5, 0, 10, 10]) == pytest.approx(50 / 150)
    assert box_iou([0, 0, 1, 1], [3, 3, 1, 1]) == 0.0


def test_energy_box_recovers_tone_burst():
    rng = np.random.default_rng(3)
    n = 120_000
    x = 1e-3 * (rng.normal(size=n) + 1j * rng.normal(size=n))
    s0, s1 = 30_000, 90_000
    x[s0:s1] += np.exp(2j * np.pi * 200e3 * np.arange(s1 - s0) / FS)
    p = stft_power(x, SPEC)
    (b,) = events_to_bboxes([ev(s0 / FS, (s1 - s0) / FS, 200e3, 5e3)], n, FS, SPEC)
    oracle = energy_box(p, b.bbox)
    assert box_iou(oracle, b.bbox) >= 0.5
    assert energy_box(np.zeros_like(p), b.bbox) is None


# --- splits and categories ----------------------------------------------


def test_splits_sizes_and_partition():
    s = make_splits(100, 5)
    assert tuple(len(s[k]) for k in ("train", "val", "test")) == (80, 10, 10)
    allidx = s["train"] + s["val"] + s["test"]
    assert sorted(allidx) == list(range(100))
    assert s == make_splits(100, 5)
    assert s != make_splits(100, 6)


@given(st.integers(10, 5000))
def test_split_remainder_to_train(n):
    s = make_splits(n, 1)
    assert len(s["val"]) == len(s["test"]) == n // 10
    assert len(s["train"]) == n - 2 * (n // 10)


def test_splits_need_ten():
    with pytest.raises(AnnotationError):
        make_splits(9, 0)


def test_categories():
    cats = coco_categories()
    assert len(cats) == 100
    assert len({c["id"] for c in cats}) == 100


# --- export -------------------------------------------------------------


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    cfg = clean_config(distributions={"num_tx": {"kind": "uniform-discrete", "range": [1, 3]},
                                      "num_rx": {"kind": "uniform-discrete", "range": [1, 2]}})
    run_batch(cfg, range(10), out=root)
    summary = export_coco(cfg, root)
    return cfg, root, summary


def test_export_layout(small_dataset):
    cfg, root, summary = small_dataset
    n = summary["images"]
    assert n >= 10
    assert sum(summary["splits"].values()) == n
    for split in ("train", "val", "test"):
        c = json.loads((root / "coco" / f"instances_{split}.json").read_text())
        ids = {im["id"] for im in c["images"]}
        assert all(a["image_id"] in ids for a in c["annotations"])
        assert len(c["categories"]) == 100
        lines = (root / "coco" / f"{split}.txt").read_text().split()
        assert len(lines) == len(c["images"])
        for im in c["images"]:
            assert (root / "coco" / im["file_name"]).exists()
    assert validate_dataset(cfg, root) == []


def test_box_count_equals_signals(small_dataset):
    cfg, root, _ = small_dataset
    from radioforge.assemble.io import read_annotation, read_iq

    for path in sorted((root / "anno").glob("*.json")):
        anno = read_annotation(path)
        p, boxes = annotate_frame(read_iq(cfg, root, anno), anno, SpectrogramSpec.from_config(cfg))
        assert len(boxes) == sum(len(t["StartTimes"]) for t in anno["annotation"]["tx"])
        for b in boxes:
            assert b.x + b.width <= p.shape[1] and b.y + b.height <= p.shape[0]


def test_reexport_identical_bytes(small_dataset, tmp_path):
    cfg, root, _ = small_dataset
    export_coco(cfg, root, dest=tmp_path / "again")
    for f in sorted((root / "coco").rglob("*")):
        if f.is_file():
            rel = f.relative_to(root / "coco")
            assert (tmp_path / "again" / rel).read_bytes() == f.read_bytes(), rel


def test_pycocotools_loads(small_dataset):
    coco_mod = pytest.importorskip("pycocotools.coco")
    _, root, _ = small_dataset
    c = coco_mod.COCO(str(root / "coco" / "instances_train.json"))
    assert len(c.getCatIds()) == 100
    n_train = len((root / "coco" / "train.txt").read_text().split())
    assert len(c.getImgIds()) == n_train >= 8
    assert len(c.getAnnIds()) == len(c.dataset["annotations"]) > 0


def test_validator_flags_corrupt_box(small_dataset, tmp_path):
    _, root, _ = small_dataset
    c = json.loads((root / "coco" / "instances_train.json").read_text())
    c["annotations"][0]["bbox"][0] = 10 ** 6
    bad = tmp_path / "instances_train.json"
    bad.write_text(json.dumps(c))
    v = validate_coco(bad)
    assert [x["code"] for x in v] == ["box-out-of-bounds"]
    frame = {im["id"]: im["frame"] for im in c["images"]}[c["annotations"][0]["image_id"]]
    assert v[0]["frame"] == frame
