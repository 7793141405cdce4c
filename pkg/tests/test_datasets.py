import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from levelseg.datasets import (
    HomographyParseError,
    SequenceLoadError,
    discover_sequences,
    format_homography,
    load_sequence,
    parse_homography,
    parse_homography_file,
    write_homography_file,
)
from levelseg.evaluation import Homography, HomographyError


def make_sequence(root, names, homographies, image=None, label=None):
    root.mkdir(parents=True, exist_ok=True)
    img = np.zeros((8, 8), np.uint8) if image is None else image
    for n in names:
        Image.fromarray(img).save(root / n)
    for name, H in homographies.items():
        write_homography_file(root / name, H)
    if label is not None:
        (root / "transform.txt").write_text(label + "\n")
    return root


def shift(tx):
    return Homography(np.array([[1.0, 0, tx], [0, 1, 0], [0, 0, 1]]))


def test_parse_identity_three_lines():
    assert parse_homography("1 0 0\n0 1 0\n0 0 1") == Homography.identity()


def test_parse_scaled_identity_normalizes():
    np.testing.assert_array_equal(parse_homography("2 0 0 0 2 0 0 0 2").h, np.eye(3))


def test_parse_wrong_count():
    with pytest.raises(HomographyParseError):
        parse_homography("1 0 0 0 1 0 0 0")


def test_parse_non_numeric():
    with pytest.raises(HomographyParseError):
        parse_homography("1 0 0 0 1 0 0 0 x")


def test_parse_singular(tmp_path):
    p = tmp_path / "H1to2p"
    p.write_text("1 2 3\n2 4 6\n0 0 1\n")
    with pytest.raises(HomographyError):
        parse_homography_file(p)


def test_parse_oxford_style_text():
    text = ("   8.7976964e-01   3.1245438e-01  -3.9430589e+01\n"
            "  -1.8389418e-01   9.3847198e-01   1.5315784e+02\n"
            "   1.9641425e-04  -1.6015275e-05   1.0000000e+00\n")
    H = parse_homography(text)
    assert H.h[0, 2] == pytest.approx(-39.430589)


@given(arrays(np.float64, (3, 3), elements=st.floats(-10, 10)))
def test_write_parse_round_trip(m):
    m = m + 4 * np.eye(3)
    try:
        H = Homography(m)
    except HomographyError:
        return
    back = parse_homography(format_homography(H))
    assert np.max(np.abs(back.h - H.h)) <= 1e-12


def test_load_oxford_names(tmp_path):
    seq = load_sequence(make_sequence(tmp_path / "graf", ["img1.ppm", "img2.ppm"], {"H1to2p": shift(3)}))
    assert seq.name == "graf"
    assert seq.ref_image.name == "img1.ppm"
    assert len(seq.tests) == 1
    assert seq.tests[0][0].name == "img2.ppm" and seq.tests[0][1] == shift(3)
    assert seq.transformation == "unknown"


def test_load_hpatches_names(tmp_path):
    d = make_sequence(tmp_path / "v_x", ["1.ppm", "3.ppm", "2.ppm"],
                      {"H_1_2": shift(2), "H_1_3": shift(3)})
    seq = load_sequence(d)
    assert [p.name for p, _ in seq.tests] == ["2.ppm", "3.ppm"]
    assert [H for _, H in seq.tests] == [shift(2), shift(3)]


def test_missing_homography_is_named(tmp_path):
    d = make_sequence(tmp_path / "s", ["1.ppm", "2.ppm", "3.ppm"], {"H_1_2": shift(2)})
    with pytest.raises(SequenceLoadError, match="H_1_3"):
        load_sequence(d)


def test_transform_label(tmp_path):
    d = make_sequence(tmp_path / "bikes", ["img1.png", "img2.png"], {"H1to2p": shift(1)}, label="blur")
    assert load_sequence(d).transformation == "blur"


def test_no_reference(tmp_path):
    d = make_sequence(tmp_path / "s", ["img2.ppm"], {"H1to2p": shift(1)})
    with pytest.raises(SequenceLoadError):
        load_sequence(d)


def test_not_a_directory(tmp_path):
    with pytest.raises(SequenceLoadError):
        load_sequence(tmp_path / "missing")


def test_discover(tmp_path):
    make_sequence(tmp_path / "a", ["img1.ppm", "img2.ppm"], {"H1to2p": shift(1)})
    make_sequence(tmp_path / "b", ["1.ppm"], {})
    (tmp_path / "notes").mkdir()
    assert [p.name for p in discover_sequences(tmp_path)] == ["a", "b"]
    assert discover_sequences(tmp_path / "a") == [tmp_path / "a"]
    assert discover_sequences(tmp_path / "nothing") == []
