import json
from pathlib import Path

import numpy as np
import pytest

import shiftbench as sb

ROOT = Path(__file__).resolve().parents[2]


def test_colorize_constant_plane():
    rgb = sb.colorize(np.full((12, 16), 900, dtype=np.uint16), method="sn")
    assert rgb.shape == (12, 16, 3)
    assert rgb.dtype == np.uint8
    assert (rgb == [128, 128, 255]).all()


def test_colorize_matches_golden_file():
    scene = sb.synthetic_scene(64, 48, 11)
    raw = (ROOT / "tests" / "data" / "scene_snpp.ppm").read_bytes()
    expected = np.frombuffer(raw[-64 * 48 * 3:], dtype=np.uint8).reshape(48, 64, 3)
    assert (sb.colorize(scene, method="sn++") == expected).all()


def test_bad_method_is_a_value_error():
    with pytest.raises(ValueError):
        sb.colorize(np.ones((4, 4), dtype=np.uint16), method="hha")


def test_mmd_estimators_agree_on_separated_clouds():
    rng = np.random.default_rng(0)
    s = rng.normal(size=(300, 2))
    t = rng.normal(size=(300, 2)) + [2.0, 0.0]
    gammas = sb.median_bank(s, t)
    assert len(gammas) == 5
    lin, quad = sb.mmd_linear(s, t, gammas), sb.mmd_quadratic(s, t, gammas)
    assert lin > 0 and quad > 0
    assert abs(lin - quad) < 0.5 * quad
    assert sb.mmd_linear(s, s, gammas) == 0.0


def test_beta_qp_on_identity():
    r = sb.beta_qp([1.0, 1.0], np.eye(2), eps=0.0)
    assert r["beta"] == pytest.approx([0.5, 0.5])
    assert r["kkt"] < 1e-9


def test_synth_and_svm():
    source, target = sb.synth("blobs-shift", 200, 200, noise=0.3, shift=0.0, seed=3)
    pred = sb.svm_fit_predict(source["x"], source["y"], 2, target["x"])
    acc = np.mean(np.array(pred) == np.array(target["y"]))
    assert acc > 0.95


def test_run_experiment_and_report(tmp_path):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps({
        "name": "tiny", "algorithm": "dan",
        "data": {"kind": "synthetic", "generator": "moons-rotate", "n_source": 100, "n_target": 100},
        "network": {"hidden": [8]},
        "train": {"epochs": 2, "batch_size": 16},
    }))
    out = sb.run_experiment(str(cfg))
    assert not out["failed"]
    fp = sb.fingerprint(str(cfg))
    metrics = {m: v for f, m, v in out["rows"] if f == fp}
    assert 0.0 <= float(metrics["target_accuracy"]) <= 1.0
    csv = tmp_path / "r.csv"
    csv.write_text("fingerprint,metric,value\n" + "".join(f"{f},{m},{v}\n" for f, m, v in out["rows"] if "," not in v))
    assert "dan" in sb.report([str(csv)])


def test_invalid_config_is_a_value_error():
    with pytest.raises(ValueError):
        sb.fingerprint(str(ROOT / "pyproject.toml"))
