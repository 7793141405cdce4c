"""Image loading, Gaussian smoothing and Sobel gradients.

Images are plain 2-D ``float64`` arrays indexed ``[y, x]`` with values in
``[0, 1]``; row-major layout matches the on-disk raster order.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import correlate1d

LUMA = (0.299, 0.587, 0.114)
GAUSS_SIGMA = 1.0
GAUSS_RADIUS = 2


class ImageFormatError(ValueError):
    """Unsupported pixel format or bit depth."""


class ImageDimensionError(ValueError):
    """Image too small for the requested filter."""


@dataclass(frozen=True)
class RawGradients:
    """Sobel responses; ``gx`` grows rightward, ``gy`` grows downward."""

    gx: np.ndarray
    gy: np.ndarray

    @property
    def height(self) -> int:
        return self.gx.shape[0]

    @property
    def width(self) -> int:
        return self.gx.shape[1]


def as_gray(data) -> np.ndarray:
    """Validate and copy an array into the grayscale convention."""
    img = np.array(data, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ImageDimensionError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("intensities must lie in [0, 1]")
    img.setflags(write=False)
    return img


def load_grayscale(path) -> np.ndarray:
    """Read an 8-bit PNG/PGM/PPM file as a grayscale image in [0, 1].

    Colour images are reduced with fixed luma weights before scaling, so the
    result does not depend on Pillow's integer conversion.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
                mode = im.mode
            if mode == "1":
                im = im.convert("L")
                mode = "L"
            if mode not in ("L", "LA", "RGB", "RGBA"):
                raise ImageFormatError(f"{path}: unsupported pixel mode {mode!r} (8-bit only)")
            arr = np.asarray(im)
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a PNG/PGM/PPM image") from exc

    arr = arr.astype(np.float64)
    if mode in ("L", "LA"):
        gray = arr if arr.ndim == 2 else arr[..., 0]
    else:
        gray = LUMA[0] * arr[..., 0] + LUMA[1] * arr[..., 1] + LUMA[2] * arr[..., 2]
    return as_gray(np.clip(gray / 255.0, 0.0, 1.0))


def gaussian_kernel(sigma: float = GAUSS_SIGMA, radius: int = GAUSS_RADIUS) -> np.ndarray:
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (offsets / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(img: np.ndarray) -> np.ndarray:
    """Separable 5x5 Gaussian (sigma 1) with edge replication at the borders."""
    img = np.asarray(img, dtype=np.float64)
    size = 2 * GAUSS_RADIUS + 1
    if img.ndim != 2 or img.shape[0] < size or img.shape[1] < size:
        raise ImageDimensionError(f"image {img.shape} is smaller than the {size}x{size} kernel")
    k = gaussian_kernel()
    out = correlate1d(img, k, axis=1, mode="nearest")
    out = correlate1d(out, k, axis=0, mode="nearest")
    # rounding can push a saturated pixel a few ulps past 1
    np.clip(out, 0.0, 1.0, out=out)
    return out


def sobel(img: np.ndarray) -> RawGradients:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ImageDimensionError(f"image {img.shape} is smaller than 3x3")
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    tl, tc, tr = img[:-2, :-2], img[:-2, 1:-1], img[:-2, 2:]
    ml, mr = img[1:-1, :-2], img[1:-1, 2:]
    bl, bc, br = img[2:, :-2], img[2:, 1:-1], img[2:, 2:]
    gx[1:-1, 1:-1] = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl)
    gy[1:-1, 1:-1] = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr)
    return RawGradients(gx, gy)
