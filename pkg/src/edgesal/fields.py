"""Scalar-field and image primitives: PNG IO, padding, blur, morphology.

Grayscale maps are 2D float64 arrays with values in [0, 1]; color images
are (H, W, 3) float64 arrays in the same range.  Binary masks are boolean
arrays.  Loading normalizes by the source bit depth (255 or 65535), saving
quantizes with round-half-up so that load(save(m)) == m for maps that are
already exact multiples of 1/255.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter1d

# Rec. 601 luma weights, in RGB channel order.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _open_checked(path: str | Path) -> Image.Image:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image file not found: {path}")
    im = Image.open(path)
    im.load()
    if im.width == 0 or im.height == 0:
        raise ValueError(f"zero-sized image: {path}")
    return im


def load_map(path: str | Path) -> np.ndarray:
    """Load a grayscale map as a 2D float64 array scaled to [0, 1].

    Accepts 8-bit grayscale, 16-bit grayscale, and RGB PNGs; RGB input is
    reduced to luma.  Any other pixel mode is rejected.
    """
    with _open_checked(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        if im.mode in ("I;16", "I"):
            return np.asarray(im, dtype=np.float64) / 65535.0
        if im.mode == "RGB":
            return to_luma(np.asarray(im, dtype=np.float64) / 255.0)
    raise ValueError(f"unsupported pixel mode {im.mode!r}: {path}")


def save_map(values: np.ndarray, path: str | Path) -> None:
    """Write a 2D map as an 8-bit grayscale PNG, clamping to [0, 1] first."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected a 2D map, got shape {values.shape}")
    q = np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(q).save(path, format="PNG")


def load_image(path: str | Path) -> np.ndarray:
    """Load a color image as an (H, W, 3) float64 array scaled to [0, 1].

    Grayscale input (8- or 16-bit) is replicated across the three channels.
    """
    with _open_checked(path) as im:
        if im.mode == "RGB":
            return np.asarray(im, dtype=np.float64) / 255.0
        if im.mode == "L":
            g = np.asarray(im, dtype=np.float64) / 255.0
            return np.stack([g, g, g], axis=-1)
        if im.mode in ("I;16", "I"):
            g = np.asarray(im, dtype=np.float64) / 65535.0
            return np.stack([g, g, g], axis=-1)
    raise ValueError(f"unsupported pixel mode {im.mode!r}: {path}")


def save_image(values: np.ndarray, path: str | Path) -> None:
    """Write an (H, W, 3) image as an 8-bit RGB PNG, clamping to [0, 1]."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3 or values.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {values.shape}")
    q = np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(q).save(path, format="PNG")


def to_luma(image: np.ndarray) -> np.ndarray:
    """Reduce an (H, W, 3) image to its Rec. 601 luma."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {image.shape}")
    r, g, b = LUMA_WEIGHTS
    return image[:, :, 0] * r + image[:, :, 1] * g + image[:, :, 2] * b


def binarize(values: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold a map into a boolean mask (values >= threshold)."""
    return np.asarray(values) >= threshold


def normalize(values: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant map collapses to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def pad_zero(values: np.ndarray, margin: int) -> np.ndarray:
    """Surround a 2D map with a zero border of the given width."""
    if margin < 0:
        raise ValueError(f"margin must be non-negative, got {margin}")
    return np.pad(np.asarray(values, dtype=np.float64), margin)


def crop(values: np.ndarray, margin: int) -> np.ndarray:
    """Remove a border of the given width; inverse of pad_zero."""
    if margin < 0:
        raise ValueError(f"margin must be non-negative, got {margin}")
    h, w = values.shape
    if h - 2 * margin < 1 or w - 2 * margin < 1:
        raise ValueError(f"margin {margin} leaves no interior for shape {values.shape}")
    if margin == 0:
        return values.copy()
    return values[margin:-margin, margin:-margin].copy()


def gaussian_blur(values: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with replicated edges.

    The kernel is sampled out to ceil(3*sigma) and normalized, so a constant
    field passes through unchanged and the overall mass is preserved up to
    boundary replication.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    out = gaussian_filter1d(np.asarray(values, dtype=np.float64), sigma,
                            axis=0, mode="nearest", radius=radius)
    return gaussian_filter1d(out, sigma, axis=1, mode="nearest", radius=radius)


def dilate_disk3(values: np.ndarray) -> np.ndarray:
    """Grayscale dilation by the 4-connected diamond (center + 4 neighbors).

    Out-of-range neighbors contribute nothing, so border pixels take the max
    over their in-range neighborhood only.
    """
    values = np.asarray(values, dtype=np.float64)
    out = values.copy()
    np.maximum(out[1:, :], values[:-1, :], out=out[1:, :])
    np.maximum(out[:-1, :], values[1:, :], out=out[:-1, :])
    np.maximum(out[:, 1:], values[:, :-1], out=out[:, 1:])
    np.maximum(out[:, :-1], values[:, 1:], out=out[:, :-1])
    return out


def erode_diamond(mask: np.ndarray) -> np.ndarray:
    """Binary erosion by the 4-connected diamond; outside counts as False."""
    mask = np.asarray(mask, dtype=bool)
    out = mask.copy()
    out[1:, :] &= mask[:-1, :]
    out[:-1, :] &= mask[1:, :]
    out[:, 1:] &= mask[:, :-1]
    out[:, :-1] &= mask[:, 1:]
    out[0, :] = False
    out[-1, :] = False
    out[:, 0] = False
    out[:, -1] = False
    return out
