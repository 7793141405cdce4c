import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from levelseg.imaging import (
    ImageDimensionError,
    ImageFormatError,
    as_gray,
    gaussian_kernel,
    gaussian_smooth,
    load_grayscale,
    sobel,
)


def _write(tmp_path, name, arr, mode=None):
    path = tmp_path / name
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode=mode).save(path)
    return path


# -- loading -----------------------------------------------------------------

def test_load_full_scale_pgm(tmp_path):
    img = load_grayscale(_write(tmp_path, "a.pgm", [[255]]))
    assert img.shape == (1, 1)
    assert img[0, 0] == 1.0


def test_load_red_ppm_uses_luma(tmp_path):
    img = load_grayscale(_write(tmp_path, "a.ppm", [[[255, 0, 0]]]))
    assert img[0, 0] == pytest.approx(0.299, abs=1e-12)


def test_load_pgm_values_divided_by_255(tmp_path):
    img = load_grayscale(_write(tmp_path, "a.pgm", [[0, 51], [102, 204]]))
    np.testing.assert_allclose(img, [[0.0, 0.2], [0.4, 0.8]], atol=1e-12)


def test_load_png_keeps_dimensions(tmp_path):
    img = load_grayscale(_write(tmp_path, "a.png", np.zeros((7, 11))))
    assert img.shape == (7, 11)


def test_load_missing_file_is_io_error(tmp_path):
    with pytest.raises(OSError):
        load_grayscale(tmp_path / "nope.png")


def test_load_garbage_is_format_error(tmp_path):
    path = tmp_path / "x.png"
    path.write_bytes(b"not an image at all")
    with pytest.raises(ImageFormatError):
        load_grayscale(path)


def test_load_16bit_is_format_error(tmp_path):
    path = tmp_path / "deep.png"
    Image.fromarray(np.full((4, 4), 40000, dtype=np.uint16)).save(path)
    with pytest.raises(ImageFormatError):
        load_grayscale(path)


def test_as_gray_rejects_out_of_range():
    with pytest.raises(ValueError):
        as_gray(np.full((3, 3), 1.5))


# -- smoothing ---------------------------------------------------------------

def test_kernel_is_sampled_normalized_gaussian():
    k = gaussian_kernel()
    raw = np.array([math.exp(-x * x / 2) for x in range(-2, 3)])
    np.testing.assert_allclose(k, raw / raw.sum(), rtol=1e-15)


def test_smooth_constant():
    out = gaussian_smooth(np.full((8, 9), 0.5))
    assert np.max(np.abs(out - 0.5)) <= 1e-12


def test_smooth_impulse_center_is_center_weight():
    img = np.zeros((9, 9))
    img[4, 4] = 1.0
    raw = np.array([math.exp(-x * x / 2) for x in range(-2, 3)])
    w = raw / raw.sum()
    assert gaussian_smooth(img)[4, 4] == pytest.approx(w[2] * w[2], abs=1e-15)


def test_smooth_preserves_interior_ramp():
    img = np.tile(np.linspace(0, 1, 9), (9, 1))
    out = gaussian_smooth(img)
    np.testing.assert_allclose(out[2:-2, 2:-2], img[2:-2, 2:-2], atol=1e-12)


def test_smooth_too_small():
    with pytest.raises(ImageDimensionError):
        gaussian_smooth(np.zeros((4, 10)))


@given(arrays(np.float64, (12, 10), elements=st.floats(0, 1)))
def test_smooth_stays_in_range(img):
    out = gaussian_smooth(img)
    assert out.min() >= 0.0 and out.max() <= 1.0


# -- sobel ---------------------------------------------------------------------

def test_sobel_vertical_step():
    img = np.zeros((7, 8))
    img[:, 4:] = 1.0
    g = sobel(img)
    # columns 3 and 4 straddle the step; each sees the full step through the 1-2-1 weights
    np.testing.assert_allclose(g.gx[1:-1, 3], 4.0)
    np.testing.assert_allclose(g.gx[1:-1, 4], 4.0)
    assert np.all(g.gy == 0)


def test_sobel_constant_is_zero():
    g = sobel(np.full((6, 6), 0.3))
    assert not g.gx.any() and not g.gy.any()


def test_sobel_border_zeroed(rng):
    g = sobel(rng.random((10, 12)))
    for a in (g.gx, g.gy):
        assert not a[0].any() and not a[-1].any() and not a[:, 0].any() and not a[:, -1].any()


def test_sobel_transpose_swaps(rng):
    img = rng.random((9, 13))
    g, gt = sobel(img), sobel(img.T)
    np.testing.assert_allclose(gt.gx, g.gy.T, atol=1e-12)
    np.testing.assert_allclose(gt.gy, g.gx.T, atol=1e-12)


def test_sobel_too_small():
    with pytest.raises(ImageDimensionError):
        sobel(np.zeros((2, 5)))


@given(arrays(np.float64, (9, 11), elements=st.floats(0, 1)))
def test_sobel_rotation_equivariance(img):
    # rot90 gives I'(x, y) = I(W-1-y, x), so gx' = gy and gy' = -gx (rotated)
    g = sobel(img)
    gr = sobel(np.rot90(img))
    np.testing.assert_allclose(gr.gx[1:-1, 1:-1], np.rot90(g.gy)[1:-1, 1:-1], atol=1e-9)
    np.testing.assert_allclose(gr.gy[1:-1, 1:-1], np.rot90(-g.gx)[1:-1, 1:-1], atol=1e-9)
