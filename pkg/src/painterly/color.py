"""sRGB <-> CIE-Lab conversion (D65 white point, 2 degree observer)."""

from __future__ import annotations

import numpy as np

# sRGB linear RGB <-> XYZ (IEC 61966-2-1)
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_D65 = np.array([0.95047, 1.0, 1.08883])
_DELTA = 6.0 / 29.0


def _srgb_to_linear(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c):
    c = np.maximum(c, 0.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _f(t):
    return np.where(t > _DELTA ** 3, np.cbrt(t), t / (3.0 * _DELTA ** 2) + 4.0 / 29.0)


def _f_inv(t):
    return np.where(t > _DELTA, t ** 3, 3.0 * _DELTA ** 2 * (t - 4.0 / 29.0))


def rgb_to_lab(image: np.ndarray) -> np.ndarray:
    """[0,1] sRGB image -> Lab (L in [0,100], a/b roughly [-128,127])."""
    rgb = np.asarray(image, dtype=np.float64)
    xyz = _srgb_to_linear(rgb) @ _RGB_TO_XYZ.T
    fxyz = _f(xyz / _D65)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * fxyz[..., 1] - 16.0
    lab[..., 1] = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    lab[..., 2] = 200.0 * (fxyz[..., 1] - fxyz[..., 2])
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Lab -> [0,1] sRGB; out-of-gamut values are clipped."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_f_inv(fx), _f_inv(fy), _f_inv(fz)], axis=-1) * _D65
    rgb = _linear_to_srgb(xyz @ _XYZ_TO_RGB.T)
    return np.clip(rgb, 0.0, 1.0)
