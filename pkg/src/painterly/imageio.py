"""8-bit PNG loading and saving."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


class ImageIOError(ValueError):
    pass


def _open_png(path: str | Path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise ImageIOError(f"{path}: file not found")
    except Exception as exc:
        raise ImageIOError(f"{path}: cannot read image ({exc})")
    if img.format != "PNG":
        raise ImageIOError(f"{path}: only PNG input is supported, got {img.format}")
    if img.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N"):
        raise ImageIOError(f"{path}: 16-bit PNG is not supported, convert to 8-bit")
    if img.mode not in ("RGB", "L"):
        raise ImageIOError(
            f"{path}: unsupported PNG mode {img.mode!r}, expected 8-bit RGB or gray")
    return img


def load_image(path: str | Path) -> np.ndarray:
    """8-bit RGB or gray PNG -> HxWx3 floats in [0, 1]."""
    img = _open_png(path)
    data = np.asarray(img, dtype=np.float64) / 255.0
    if data.ndim == 2:
        data = np.stack([data] * 3, axis=2)
    return data


def load_mask(path: str | Path) -> np.ndarray:
    """PNG mask -> HxW booleans; any nonzero pixel counts as inside."""
    img = _open_png(path)
    data = np.asarray(img)
    if data.ndim == 3:
        return data.any(axis=2)
    return data != 0


def save_image(image: np.ndarray, path: str | Path) -> None:
    """[0,1] floats -> 8-bit PNG (round-to-nearest quantization)."""
    data = np.rint(np.clip(np.asarray(image), 0.0, 1.0) * 255.0).astype(np.uint8)
    if data.ndim == 3:
        Image.fromarray(data, mode="RGB").save(path, format="PNG")
    else:
        Image.fromarray(data, mode="L").save(path, format="PNG")
