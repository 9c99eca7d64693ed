"""PNG serialization for color, depth, and tactile images.

Depth maps are stored as 16-bit grayscale PNG in integer millimeters, which
covers the full 0-600 mm working range without precision loss worth caring
about (the camera noise floor is ~2 mm).
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def save_color_png(path, color: np.ndarray) -> None:
    arr = np.asarray(color)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("color image must be HxWx3 uint8")
    Image.fromarray(arr, mode="RGB").save(path)


def load_color_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_depth_png(path, depth: np.ndarray) -> None:
    arr = np.asarray(depth, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("depth map must be HxW")
    if np.any(arr < 0) or np.any(arr > 65535):
        raise ValueError("depth out of uint16 millimeter range")
    quantized = np.round(arr).astype(np.uint16)
    Image.fromarray(quantized, mode="I;16").save(path)


def load_depth_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.float64)


def save_gray_png(path, image: np.ndarray) -> None:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("grayscale image must be HxW")
    Image.fromarray(np.clip(np.round(arr), 0, 255).astype(np.uint8), mode="L").save(path)


def load_gray_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64)
