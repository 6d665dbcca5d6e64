"""Predict reconstruction weights from a painting's style and texture.

A style-probability vector (softmax output of any 18-way style
classifier, supplied as JSON) is linearly interpolated against a
strength table to give the style/histogram weight tau; the smoothness
weight is tau scaled by a steep sigmoid of the painting's median
per-pixel total variation, so heavily textured paintings receive almost
no smoothing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

STRENGTH_WEIGHTS = {
    "Weak": (1.0, 1.0),
    "Medium": (5.0, 5.0),
    "Strong": (10.0, 10.0),
}
PROB_SUM_TOL = 1e-6
STYLE_COUNT = 18


class EstimatorError(ValueError):
    pass


@dataclass
class StyleEntry:
    name: str
    strength: str
    w_s: float
    w_hist: float
    default: bool = False


@dataclass
class StyleCategoryTable:
    entries: list[StyleEntry]

    def __post_init__(self) -> None:
        seen = set()
        for e in self.entries:
            if e.name in seen:
                raise EstimatorError(f"duplicate style {e.name!r}")
            seen.add(e.name)
            expected = STRENGTH_WEIGHTS.get(e.strength)
            if expected is None:
                raise EstimatorError(
                    f"style {e.name!r}: unknown strength {e.strength!r}")
            if (e.w_s, e.w_hist) != expected:
                raise EstimatorError(
                    f"style {e.name!r}: weights {(e.w_s, e.w_hist)} do not"
                    f" match strength {e.strength!r} -> {expected}")

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def weights(self, name: str) -> tuple[float, float]:
        for e in self.entries:
            if e.name == name:
                return e.w_s, e.w_hist
        raise EstimatorError(f"unknown style key {name!r}")


class WeightTriple(NamedTuple):
    w_s: float
    w_hist: float
    w_tv: float


def load_style_table(path: str | Path | None = None) -> StyleCategoryTable:
    """Load the strength table (the bundled 18-style file by default)."""
    if path is None:
        text = resources.files("painterly").joinpath("data/style_table.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EstimatorError(f"style table is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("styles"), list):
        raise EstimatorError('style table must be {"styles": [...]}')
    entries = []
    for item in raw["styles"]:
        if not isinstance(item, dict) or not {"name", "strength", "w_s", "w_hist"} <= set(item):
            raise EstimatorError(f"style record missing fields: {item!r}")
        entries.append(StyleEntry(str(item["name"]), str(item["strength"]),
                                  float(item["w_s"]), float(item["w_hist"]),
                                  bool(item.get("default", False))))
    if len(entries) != STYLE_COUNT:
        raise EstimatorError(f"style table must list {STYLE_COUNT} styles,"
                             f" found {len(entries)}")
    return StyleCategoryTable(entries)


def load_style_probs(path: str | Path) -> dict[str, float]:
    """Load a {"styles": {name: probability}} JSON file."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise EstimatorError(f"style probs file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("styles"), dict):
        raise EstimatorError('style probs must be {"styles": {name: prob}}')
    return {str(k): float(v) for k, v in raw["styles"].items()}


def one_hot_probs(name: str, table: StyleCategoryTable) -> dict[str, float]:
    if name not in table.names:
        raise EstimatorError(f"unknown style key {name!r}")
    return {name: 1.0}


def validate_probs(probs: dict[str, float], table: StyleCategoryTable) -> None:
    unknown = set(probs) - set(table.names)
    if unknown:
        raise EstimatorError(f"unknown style key(s): {sorted(unknown)}")
    if any(v < 0 for v in probs.values()):
        raise EstimatorError("style probabilities must be nonnegative")
    total = sum(probs.values())
    if abs(total - 1.0) >= PROB_SUM_TOL:
        raise EstimatorError(f"style probabilities sum to {total}, expected 1")


def interpolate_weights(probs: dict[str, float],
                        table: StyleCategoryTable) -> tuple[float, float]:
    """Probability-weighted average of the table's (w_s, w_hist) pairs."""
    validate_probs(probs, table)
    w_s = w_hist = 0.0
    for name, p in probs.items():
        ws, wh = table.weights(name)
        w_s += p * ws
        w_hist += p * wh
    return w_s, w_hist


def pixel_tv(image: np.ndarray) -> np.ndarray:
    """Per-pixel total variation: squared backward differences summed
    over channels; out-of-range neighbors contribute nothing."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    t = np.zeros(img.shape[:2])
    t[1:, :] += np.sum((img[1:, :] - img[:-1, :]) ** 2, axis=2)
    t[:, 1:] += np.sum((img[:, 1:] - img[:, :-1]) ** 2, axis=2)
    return t


def median_tv(image: np.ndarray) -> float:
    """Median of the per-pixel TV map (lower middle for even counts)."""
    values = pixel_tv(image).ravel()
    k = (values.size - 1) // 2
    return float(np.partition(values, k)[k])


def tv_sigmoid(x: float) -> float:
    """10 / (1 + exp(1e4 x - 25)): ~10 for flat paintings, ~0 for textured."""
    exponent = 1.0e4 * x - 25.0
    if exponent > 700.0:
        return 0.0
    return 10.0 / (1.0 + math.exp(exponent))


def predict_weights(style_image: np.ndarray, probs: dict[str, float],
                    table: StyleCategoryTable) -> WeightTriple:
    """Full weight prediction: tau from the style mix, TV from texture."""
    w_s, w_hist = interpolate_weights(probs, table)
    tau = w_s
    return WeightTriple(w_s, w_hist, tau * tv_sigmoid(median_tv(style_image)))
