import json
import subprocess
import sys

import pytest

from helpers import ONE, RX_OFF, TX_OFF
from radioforge.cli import EXIT_CONFIG, EXIT_INVALID, EXIT_IO, EXIT_OK, main, parse_frames
from radioforge.config import config_from_dict, sample_scenario
from radioforge.errors import ConfigError

SMALL = {
    "num_frames": 50,
    "channel": {"weights": {"statistical": 1.0, "raytrace": 0.0, "awgn": 0.0}},
    "impairments": {"tx": dict(TX_OFF), "rx": {**RX_OFF, "thermal_noise": True}},
    "distributions": {"num_tx": {"kind": "uniform-discrete", "range": [1, 2]},
                      "num_rx": {"kind": "uniform-discrete", "range": [1, 3]},
                      "tx_antennas": ONE, "rx_antennas": {"kind": "uniform-discrete", "range": [1, 2]},
                      "symbols_per_segment": {"kind": "uniform-discrete", "range": [500, 800]}},
}


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return p


def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_parse_frames():
    assert list(parse_frames("0..9", 100)) == list(range(10))
    assert list(parse_frames("7", 100)) == [7]
    assert parse_frames(None, 3) == range(3)
    for bad in ("a..b", "5..2", "0..100"):
        with pytest.raises(ConfigError):
            parse_frames(bad, 100)


def test_generate_twice_identical(small_cfg, tmp_path):
    for d in ("a", "b"):
        rc = main(["generate", "--config", str(small_cfg), "--out", str(tmp_path / d), "--frames", "0..9",
                   "--workers", "4", "--quiet"])
        assert rc == EXIT_OK
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert a.keys() == b.keys() and a == b
    assert any(k.startswith("anno/Frame_000009_Rx_") for k in a)


def test_generate_seed_changes_output(small_cfg, tmp_path):
    main(["generate", "--config", str(small_cfg), "--out", str(tmp_path / "a"), "--frames", "0..1", "--quiet"])
    main(["generate", "--config", str(small_cfg), "--out", str(tmp_path / "b"), "--frames", "0..1", "--quiet",
          "--seed", "99"])
    assert tree_bytes(tmp_path / "a") != tree_bytes(tmp_path / "b")


def _seed_with_rx_counts(counts):
    for seed in range(1000):
        cfg = config_from_dict({**SMALL, "seed": seed})
        if [len(sample_scenario(cfg, i).rxs) for i in range(len(counts))] == counts:
            return seed
    raise AssertionError("no seed found")


def test_stats_reports_sum_of_receivers(small_cfg, tmp_path, capsys):
    seed = _seed_with_rx_counts([2, 3, 1])
    out = tmp_path / "ds"
    assert main(["generate", "--config", str(small_cfg), "--out", str(out), "--frames", "0..2", "--seed",
                 str(seed), "--quiet"]) == EXIT_OK
    capsys.readouterr()
    report = tmp_path / "stats.json"
    assert main(["stats", str(out), "--json-report", str(report), "--plots", str(tmp_path / "plots")]) == EXIT_OK
    text = capsys.readouterr().out
    assert "total frames (sum of receivers over scenarios): 6" in text
    r = json.loads(report.read_text())
    assert r["total_frames"] == 6 and r["total_scenarios"] == 3 and r["exit_code"] == 0
    assert (tmp_path / "plots" / "classes.png").exists()


@pytest.fixture
def dataset(small_cfg, tmp_path):
    out = tmp_path / "ds"
    assert main(["generate", "--config", str(small_cfg), "--out", str(out), "--frames", "0..7", "--quiet"]) == 0
    assert main(["coco-export", str(out)]) == EXIT_OK
    return out


def test_validate_clean_dataset(dataset, capsys):
    assert main(["validate", "--dataset", str(dataset)]) == EXIT_OK
    assert "no violations" in capsys.readouterr().out


def test_validate_corrupt_coco_box(dataset, capsys):
    path = dataset / "coco" / "instances_train.json"
    c = json.loads(path.read_text())
    a = c["annotations"][0]
    im = next(i for i in c["images"] if i["id"] == a["image_id"])
    a["bbox"] = [im["width"] - 2, 0, 10, 10]
    path.write_text(json.dumps(c))
    assert main(["validate", "--dataset", str(dataset)]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "box-out-of-bounds" in err and im["frame"] in err


def test_validate_corrupt_annotation(dataset, capsys):
    path = sorted((dataset / "anno").glob("*.json"))[1]
    a = json.loads(path.read_text())
    a["annotation"]["tx"][0]["StartTimes"][0] = a["annotation"]["rx"]["TimeDuration"] + 1.0
    path.write_text(json.dumps(a))
    assert main(["validate", "--dataset", str(dataset)]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert path.stem in err and "event-outside-frame" in err


def test_validate_config(tmp_path, small_cfg):
    assert main(["validate", "--config", str(small_cfg)]) == EXIT_OK
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"band": [1, 0]}))
    assert main(["validate", "--config", str(bad)]) == EXIT_CONFIG


def test_exit_codes(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["generate", "--config", str(missing), "--out", str(tmp_path / "o")]) == EXIT_IO
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no_such_key": 1}))
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "no_such_key" in capsys.readouterr().err
    bad.write_text("{not json")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_failed_frames_exit_nonzero(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"band": [-5e3, 5e3], "schedule": {"max_retries": 1}}))
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--frames", "0..1",
                 "--quiet"]) == EXIT_INVALID


def test_spectrogram_and_registry(dataset, tmp_path, capsys):
    frame = sorted((dataset / "anno").glob("*.json"))[0]
    png = tmp_path / "s.png"
    rep = tmp_path / "r.json"
    assert main(["spectrogram", str(frame), "--out", str(png), "--boxes", "--json-report", str(rep)]) == EXIT_OK
    assert png.stat().st_size > 0
    n_boxes = len(json.loads(rep.read_text())["boxes"])
    anno = json.loads(frame.read_text())
    assert n_boxes == sum(len(t["StartTimes"]) for t in anno["annotation"]["tx"])
    assert main(["spectrogram", str(frame), "--out", str(png), "--antenna", "9"]) == EXIT_CONFIG
    capsys.readouterr()
    assert main(["registry"]) == EXIT_OK
    assert len(capsys.readouterr().out.strip().splitlines()) == 100


def test_coverage(tmp_path):
    png, csv = tmp_path / "cov.png", tmp_path / "cov.csv"
    assert main(["coverage", "urban_grid.osm", "--tx", "0", "0", "20", "--spacing", "25", "--out", str(png),
                 "--csv", str(csv)]) == EXIT_OK
    assert png.stat().st_size > 0 and csv.read_text().startswith("x,y,dbm,flag")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "radioforge", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "generate" in r.stdout
