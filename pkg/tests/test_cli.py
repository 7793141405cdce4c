import csv
import io
import json

import numpy as np
import pytest
from PIL import Image

from levelseg import cli
from levelseg.detector import detect_segments
from levelseg.evaluation import PRESETS, match_segments
from levelseg.imaging import load_grayscale
from levelseg.params import DetectorParams
from levelseg.records import DetectionRecord, RecordFormatError
from levelseg.synthetic import rigid_homography, texture_image, warp_image

from conftest import rectangle_image
from test_datasets import make_sequence


def save(path, img):
    Image.fromarray(np.clip(np.rint(np.asarray(img) * 255), 0, 255).astype(np.uint8)).save(path)
    return path


@pytest.fixture
def rect_png(tmp_path):
    return save(tmp_path / "rect.png", rectangle_image())


def detect_to(tmp_path, image, name, *flags):
    out = tmp_path / name
    assert cli.main(["detect", str(image), "-o", str(out), *flags]) == 0
    return out


# -- records -------------------------------------------------------------------

def test_record_round_trip_exact(tmp_path):
    rng = np.random.default_rng(5)
    segs = detect_segments(texture_image(rng, shape=(120, 160)))
    assert segs
    rec = DetectionRecord("x.png", 160, 120, DetectorParams(rho=1.5, init_refine=False), segs)
    rec.write(tmp_path / "r.json")
    back = DetectionRecord.read(tmp_path / "r.json")
    assert back == rec
    assert back.dumps() == rec.dumps()


def test_record_schema(tmp_path, rect_png):
    data = json.loads(detect_to(tmp_path, rect_png, "r.json").read_text())
    assert {"image", "width", "height", "params", "segments"} <= set(data)
    assert (data["width"], data["height"]) == (400, 300)
    assert set(data["params"]) == set(DetectorParams().to_dict())
    for s in data["segments"]:
        assert {"x1", "y1", "x2", "y2", "a", "b", "c", "support", "mean_dist", "mean_angle"} <= set(s)


@pytest.mark.parametrize("text", ["{", "[]", '{"image": "a"}', '{"image": "a", "width": 1, "height": 1, '
                                                              '"params": {"bogus": 1}}'])
def test_malformed_records(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    with pytest.raises(RecordFormatError):
        DetectionRecord.read(p)


# -- detect --------------------------------------------------------------------

def test_detect_blank(tmp_path):
    img = save(tmp_path / "blank.png", np.zeros((40, 60)))
    rec = DetectionRecord.read(detect_to(tmp_path, img, "b.json"))
    assert rec.segments == []


def test_detect_rectangle_four_segments(tmp_path, rect_png):
    rec = DetectionRecord.read(detect_to(tmp_path, rect_png, "r.json", "--svg", str(tmp_path / "r.svg")))
    assert len(rec.segments) == 4
    svg = (tmp_path / "r.svg").read_text()
    assert svg.count("<polyline") == 4 and svg.count("<line ") == 4
    assert "data:image/png;base64," in svg


def test_detect_invalid_path(tmp_path, capsys):
    out = tmp_path / "never.json"
    assert cli.main(["detect", str(tmp_path / "nope.png"), "-o", str(out)]) == 2
    assert not out.exists()
    assert "nope.png" in capsys.readouterr().err


def test_detect_bad_param_is_usage_error(tmp_path, rect_png):
    assert cli.main(["detect", str(rect_png), "--inlier-ratio", "1.5"]) == 2


def test_detect_flags_reach_params(tmp_path, rect_png):
    rec = DetectionRecord.read(detect_to(tmp_path, rect_png, "r.json", "--grad-thresh", "0.3", "--radius", "7",
                                         "--min-length", "20", "--no-init-refine", "--no-angle-check",
                                         "--rho", "1", "--init-window", "11", "--dist-thresh", "2",
                                         "--angle-thresh", "15", "--inlier-ratio", "0.6"))
    assert rec.params == DetectorParams(grad_thresh=0.3, equalize_radius=7, min_length=20, init_refine=False,
                                        use_angle_check=False, rho=1, init_window=11, dist_thresh=2,
                                        angle_thresh=15, inlier_ratio=0.6)


def test_detect_to_stdout(rect_png, capsys):
    assert cli.main(["detect", str(rect_png)]) == 0
    assert len(json.loads(capsys.readouterr().out)["segments"]) == 4


def test_detect_deterministic_bytes(tmp_path):
    img = save(tmp_path / "t.png", texture_image(np.random.default_rng(9), shape=(150, 200)))
    a = detect_to(tmp_path, img, "a.json").read_bytes()
    b = detect_to(tmp_path, img, "b.json").read_bytes()
    assert a == b


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["detect"])
    assert exc.value.code == 2


def test_internal_error(monkeypatch, rect_png):
    def boom(*a, **k):
        raise RuntimeError("kaboom")
    monkeypatch.setattr(cli, "detect_segments", boom)
    assert cli.main(["detect", str(rect_png)]) == 1


# -- eval ----------------------------------------------------------------------

def _pair(tmp_path):
    rng = np.random.default_rng(2)
    img = texture_image(rng, shape=(150, 200))
    H = rigid_homography(0.1, 3, -2, center=(100, 75))
    ref = detect_to(tmp_path, save(tmp_path / "ref.png", img), "ref.json")
    test = detect_to(tmp_path, save(tmp_path / "test.png", warp_image(img, H)), "test.json")
    hp = tmp_path / "H"
    hp.write_text(" ".join(repr(float(x)) for x in H.h.ravel()))
    return ref, test, hp


def _printed(capsys):
    out = capsys.readouterr().out.split()
    return dict(zip(out[0::2], out[1::2]))


def test_eval_self(tmp_path, rect_png, capsys):
    r = detect_to(tmp_path, rect_png, "r.json")
    capsys.readouterr()
    assert cli.main(["eval", str(r), str(r)]) == 0
    got = _printed(capsys)
    assert float(got["rep"]) == 1.0 and got["n_m"] == "4"


def test_eval_empty_test(tmp_path, rect_png, capsys):
    r = detect_to(tmp_path, rect_png, "r.json")
    b = detect_to(tmp_path, save(tmp_path / "b.png", np.zeros((300, 400))), "b.json")
    capsys.readouterr()
    assert cli.main(["eval", str(r), str(b)]) == 0
    assert float(_printed(capsys)["rep"]) == 0.0


def test_eval_presets_and_report(tmp_path, capsys):
    ref, test, hp = _pair(tmp_path)
    reps = {}
    for preset in ("strict", "loose"):
        report = tmp_path / f"{preset}.json"
        assert cli.main(["eval", str(ref), str(test), str(hp), "--config", preset, "--report", str(report)]) == 0
        data = json.loads(report.read_text())
        reps[preset] = data["rep"]
        assert data["n_m"] == len(data["pairs"])
    assert reps["loose"] >= reps["strict"]
    assert reps["loose"] > 0.5


def test_eval_explicit_thresholds(tmp_path, capsys):
    ref, test, hp = _pair(tmp_path)
    report = tmp_path / "r.json"
    assert cli.main(["eval", str(ref), str(test), str(hp), "--config", "strict", "--ed", "3", "--ea", "10",
                     "--report", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["config"] == {"dist_thresh": 3.0, "angle_thresh": 10.0, "overlap_thresh": 0.75}


def test_eval_bad_homography(tmp_path, rect_png):
    r = detect_to(tmp_path, rect_png, "r.json")
    hp = tmp_path / "H"
    hp.write_text("1 0 0 0 1 0 0 0")
    assert cli.main(["eval", str(r), str(r), str(hp)]) == 2


def test_eval_missing_record(tmp_path):
    assert cli.main(["eval", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == 2


# -- bench ---------------------------------------------------------------------

def _bench_sequence(root, seed, label=None):
    rng = np.random.default_rng(seed)
    img = texture_image(rng, shape=(120, 160))
    H = rigid_homography(0.05, 2, 1, center=(80, 60))
    make_sequence(root, [], {"H1to2p": H}, label=label)
    save(root / "img1.png", img)
    save(root / "img2.png", warp_image(img, H))
    return H


def _expected_rep(root, H):
    ref = detect_segments(load_grayscale(root / "img1.png"))
    test = detect_segments(load_grayscale(root / "img2.png"))
    return match_segments(ref, test, H, PRESETS["loose"]).rep


def _read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_bench_single_pair_matches_eval(tmp_path, capsys):
    H = _bench_sequence(tmp_path / "data" / "s1", 1)
    out = tmp_path / "t.csv"
    assert cli.main(["bench", str(tmp_path / "data"), "--csv", str(out)]) == 0
    rows = _read_csv(out)
    seq = [r for r in rows if r["kind"] == "sequence"]
    assert len(seq) == 1 and seq[0]["pairs"] == "1"
    assert float(seq[0]["rep"]) == pytest.approx(_expected_rep(tmp_path / "data" / "s1", H), abs=1e-6)
    table = capsys.readouterr().out
    assert table.splitlines()[0].split() == ["kind", "name", "transformation", "pairs", "rep"]


def test_bench_transformation_means(tmp_path):
    data = tmp_path / "data"
    Hs = {"a": _bench_sequence(data / "a", 1, "blur"), "b": _bench_sequence(data / "b", 2, "view"),
          "c": _bench_sequence(data / "c", 3, "view")}
    make_sequence(data / "broken", ["img1.png", "img2.png"], {})  # no homography: skipped
    rows = cli.run_bench(data)
    reps = {n: _expected_rep(data / n, Hs[n]) for n in Hs}
    tr = {r["name"]: r for r in rows if r["kind"] == "transformation"}
    assert set(tr) == {"blur", "view"}
    assert tr["blur"]["rep"] == pytest.approx(reps["a"], abs=1e-12)
    assert tr["view"]["rep"] == pytest.approx((reps["b"] + reps["c"]) / 2, abs=1e-12)
    assert [r["name"] for r in rows if r["kind"] == "sequence"] == ["a", "b", "c"]


def test_bench_parallel_matches_serial(tmp_path):
    data = tmp_path / "data"
    _bench_sequence(data / "a", 4)
    _bench_sequence(data / "b", 5)
    assert cli.run_bench(data, jobs=2) == cli.run_bench(data)


def test_bench_empty_root(tmp_path):
    (tmp_path / "empty").mkdir()
    assert cli.main(["bench", str(tmp_path / "empty")]) == 2


# -- render ----------------------------------------------------------------------

def test_render(tmp_path, rect_png):
    r = detect_to(tmp_path, rect_png, "r.json")
    out = tmp_path / "o.svg"
    assert cli.main(["render", str(r), "-o", str(out)]) == 0
    assert out.read_text().count("<polyline") == 4


def test_render_size_mismatch(tmp_path, rect_png):
    r = detect_to(tmp_path, rect_png, "r.json")
    other = save(tmp_path / "small.png", np.zeros((10, 10)))
    assert cli.main(["render", str(r), "--image", str(other), "-o", str(tmp_path / "o.svg")]) == 2
