import math
import os
from pathlib import Path

import numpy as np
import pytest

import geobridge as gb

DATA = Path(os.environ.get("GEOBRIDGE_TEST_DATA", Path(__file__).resolve().parents[2] / "tests" / "data"))


def test_haversine_anchors():
    assert gb.haversine_distance((0, 0), (1, 0)) == pytest.approx(111194.9, abs=0.1)
    assert gb.haversine_distance((0, 0), (0, 180)) == pytest.approx(math.pi * gb.EARTH_RADIUS_M)


def test_overlap_and_transforms():
    a = (48.8566, 2.3522, 80.0, 80.0)
    assert gb.overlap_ratio(a, a) == 1.0
    t = (10.0, 0.5, 0.0, 20.0, 0.0, -0.5)
    assert gb.pixel_to_geo(t, 2, 2) == (19.0, 11.0)
    col, row = gb.geo_to_pixel(t, 19.0, 11.0)
    assert (col, row) == pytest.approx((2.0, 2.0))


def test_errors_carry_a_code():
    with pytest.raises(gb.GeoBridgeError) as info:
        gb.geo_to_pixel((0, 1, 2, 0, 2, 4), 1.0, 1.0)
    assert info.value.code == "SingularTransform"
    assert isinstance(info.value, ValueError)


def test_gates_on_fixtures():
    textured = gb.load_image(DATA / "gates" / "textured.png")
    assert textured.dtype == np.uint8 and textured.shape[2] == 3
    assert gb.gate_report(textured, id="t")["verdict"] == "pass"
    flat = np.full((32, 32), 128, dtype=np.uint8)
    report = gb.gate_report(flat)
    assert report["rejected_by"] == "BH"
    assert gb.laplacian_variance(flat) == 0.0
    strict = gb.gate_report(textured, thresholds={"bh_lap_min": 1e9})
    assert strict["rejected_by"] == "BH"


def test_infonce_and_total_loss():
    for b in (2, 5, 17):
        assert gb.infonce(np.zeros((b, b))) == pytest.approx(math.log(b), abs=1e-12)
    eye = np.eye(3)
    out = gb.total_loss(eye, eye, eye, eye, tau=1.0)
    assert set(out["pairs"]) == {"d->s", "s->p", "p->d", "t->d", "t->p", "t->s"}
    assert out["total"] == pytest.approx(out["image"] + out["text"])


def test_train_toy_aligns():
    r = gb.train_toy(steps=60)
    assert len(r["trace"]) == 61
    assert r["trace"][-1]["L_total"] < r["trace"][0]["L_total"]
    assert len(r["recall_at_1"]) == 6


def test_gbem_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((50, 8))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    path = tmp_path / "e.gbem"
    gb.write_gbem(path, "satellite", list(range(50)), rows)
    view, ids, back = gb.read_gbem(path)
    assert view == "satellite"
    assert ids.tolist() == list(range(50))
    np.testing.assert_array_equal(back, rows.astype(np.float32).astype(np.float64))
    with pytest.raises(gb.GeoBridgeError):
        gb.write_gbem(path, "satellite", [0], np.ones((1, 8)))


def test_evaluate():
    r = gb.evaluate([[0, 1, 2], [0, 1, 2]], [0, 1], k_list=[1, 2])
    assert r["R@1"] == 0.5
    assert r["R@2"] == 1.0
    assert r["AP"] == 0.75


def test_cli_in_process(tmp_path):
    code, out, _ = gb.run_cli(["--version"])
    assert code == 0 and gb.__version__ in out
    mini = DATA / "mini"
    code, out, err = gb.run_cli([
        "build", "--seeds", str(mini / "seeds.jsonl"), "--input", str(mini / "raster.png"),
        "--transform", str(mini / "raster.json"), "--provider-root", str(mini / "provider"),
        "--out", str(tmp_path / "out"),
    ])
    assert code == 0, err
    assert (tmp_path / "out" / "manifest.jsonl").read_bytes() == (mini / "golden" / "manifest.jsonl").read_bytes()
