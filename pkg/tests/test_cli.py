import json

import numpy as np
import pytest

from bbinit.cli import main
from bbinit.files import read_image, read_mask, write_image, write_mask
from bbinit.metrics import iou
from bbinit.synthetic import square_scene


@pytest.fixture
def scene(tmp_path):
    frame, bbox, gt = square_scene(30)
    write_image(tmp_path / "img.png", frame)
    write_mask(tmp_path / "gt.png", gt)
    return tmp_path, bbox, gt


def region(bbox):
    return f"{bbox.x},{bbox.y},{bbox.w},{bbox.h}"


def test_segment_lbdm(scene, capsys):
    d, bbox, gt = scene
    code = main([
        "segment", str(d / "img.png"), "--region", region(bbox), "--out", str(d / "m.png"),
        "--method", "lbdm", "--rho-minus", "0.8", "--rho-plus", "1.2", "--tau", "0.85", "--lambda", "1e-2",
        "--gt-mask", str(d / "gt.png"),
    ])
    assert code == 0
    m = read_mask(d / "m.png")
    assert (m.width, m.height) == (90, 90) and iou(gt, m) >= 0.95
    assert "phi_all" in capsys.readouterr().out


def test_segment_sbbm_seeded_and_debug(scene):
    d, bbox, _ = scene
    (d / "r.txt").write_text(region(bbox) + "\n")
    args = ["segment", str(d / "img.png"), "--region-file", str(d / "r.txt"), "--method", "sbbm", "--seed", "4"]
    assert main(args + ["--out", str(d / "a.png"), "--debug-dir", str(d / "dbg")]) == 0
    assert main(args + ["--out", str(d / "b.png")]) == 0
    assert (d / "a.png").read_bytes() == (d / "b.png").read_bytes()
    assert (d / "dbg" / "superpixels.png").is_file()


def test_missing_image_exit_1(tmp_path, capsys):
    missing = tmp_path / "nope.png"
    assert main(["segment", str(missing), "--region", "1,1,5,5", "--out", str(tmp_path / "o.png")]) == 1
    assert "nope.png" in capsys.readouterr().err


def test_usage_errors_exit_2(scene):
    d, bbox, _ = scene
    base = ["segment", str(d / "img.png"), "--region", region(bbox), "--out", str(d / "o.png")]
    assert main(base + ["--tau", "0.3"]) == 2
    assert main(base + ["--method", "sbbm", "--tau", "0.8"]) == 2
    assert main(base[:3] + ["--out", str(d / "o.png")]) == 2
    assert not (d / "o.png").exists()
    assert main(["segment"]) == 2
    assert main(["--version"]) == 0


def test_evaluate_entire_bb(square_dataset, tmp_path):
    out = tmp_path / "e.json"
    assert main(["evaluate", str(square_dataset), "--method", "entire-bb", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert len(rep["phi_all"]) == 5
    # first frame: 24 x 24 square inside a 26 x 26 rasterised box
    assert rep["phi_all"][0] == 576 / 676
    assert rep["mean_phi_all"] == pytest.approx(np.mean(rep["phi_all"]))


def test_evaluate_empty_dataset(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["evaluate", str(tmp_path / "empty"), "--method", "entire-bb"]) == 1


def test_cv_outputs_and_cache(square_dataset, tmp_path):
    grid = tmp_path / "g.json"
    grid.write_text(json.dumps({"method": "lbdm", "axes": {"tau": [0.6, 0.85]}}))
    cmd = ["cv", str(square_dataset), "--method", "lbdm", "--grid", str(grid), "--cache-dir", str(tmp_path / "c")]
    assert main(cmd + ["--out", str(tmp_path / "r1.json"), "--table-out", str(tmp_path / "t.json")]) == 0
    assert main(cmd + ["--out", str(tmp_path / "r2.json"), "--workers", "2"]) == 0
    assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
    rep = json.loads((tmp_path / "r1.json").read_text())
    assert [f["sequence"] for f in rep["folds"]] == ["seq1", "seq2"]
    assert all(f["selected_params"]["tau"] in (0.6, 0.85) for f in rep["folds"])
    assert (tmp_path / "r1.txt").is_file()
    assert len(json.loads((tmp_path / "t.json").read_text())["params"]) == 2


def test_cv_bad_grid_exit_2(square_dataset, tmp_path):
    grid = tmp_path / "g.json"
    grid.write_text(json.dumps({"method": "ocsvm", "axes": {"nu": [1.5]}}))
    assert main(["cv", str(square_dataset), "--method", "ocsvm", "--grid", str(grid)]) == 2
    assert main(["cv", str(square_dataset), "--method", "lbdm", "--grid", str(tmp_path / "missing.json")]) == 2
    assert main(["cv", str(square_dataset), "--workers", "0"]) == 2


def test_render(scene, tmp_path):
    d, _, gt = scene
    assert main(["render", str(d / "img.png"), str(d / "gt.png"), "--out", str(tmp_path / "ov.png")]) == 0
    ov = read_image(tmp_path / "ov.png")
    img = read_image(d / "img.png")
    np.testing.assert_array_equal(ov[~gt.labels], img[~gt.labels])
    write_mask(tmp_path / "small.png", gt.__class__(np.zeros((4, 4), bool)))
    assert main(["render", str(d / "img.png"), str(tmp_path / "small.png"), "--out", str(tmp_path / "x.png")]) == 1


def test_inputs_not_modified(scene):
    d, bbox, _ = scene
    before = (d / "img.png").read_bytes()
    main(["segment", str(d / "img.png"), "--region", region(bbox), "--out", str(d / "m.png")])
    assert (d / "img.png").read_bytes() == before
