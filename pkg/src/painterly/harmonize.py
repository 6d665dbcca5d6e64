"""Two-pass harmonization: coarse robust transfer, then consistent refinement.

Each pass extracts features of the working image and the painting, maps
in-mask patches to painting patches, builds reconstruction targets from
the mapped activations, and re-optimizes the image with L-BFGS starting
from the pass input.  Pass 1 matches layers independently and pools
everything into Gram targets; pass 2 matches only at the reference layer
with spatial-consistency voting, deduplicates target vectors, and adds
histogram and smoothness terms.  Only pixels inside a dilated mask are
free variables; everything else stays bit-identical to the painting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy.ndimage import distance_transform_edt

from . import backbone
from .lbfgs import OptimizeReport, lbfgs_minimize
from .losses import (
    LossConfig,
    build_style_targets,
    content_targets,
    total_loss,
)
from .mapping import MappingField, consistent_mapping, independent_mapping, resize_mask

DEFAULT_ITERATIONS = 1000
DEFAULT_DILATION = 8
DEFAULT_GRAD_TOL = 1e-7
MAX_DIMENSION = 512


class HarmonizeError(ValueError):
    pass


@dataclass
class PassConfig:
    content_layers: dict[str, float] = field(default_factory=dict)
    style_layers: dict[str, float] = field(default_factory=dict)
    hist_layers: dict[str, float] = field(default_factory=dict)
    mapping: str = "independent"       # or "consistent"
    target_mode: str = "all"           # or "unique"
    ref_layer: str | None = None       # consistent mapping only
    w_s: float = 1.0
    w_hist: float = 0.0
    w_tv: float = 0.0
    iterations: int = DEFAULT_ITERATIONS

    def all_layers(self) -> set[str]:
        used = set(self.content_layers) | set(self.style_layers) | set(self.hist_layers)
        if self.ref_layer:
            used.add(self.ref_layer)
        return used

    def mapping_layers(self) -> set[str]:
        used = set(self.style_layers) | set(self.hist_layers)
        if self.ref_layer:
            used.add(self.ref_layer)
        return used


def pass1_config(w_s: float = 5.0, iterations: int = DEFAULT_ITERATIONS) -> PassConfig:
    """Robust coarse pass: independent matching, pooled Gram targets."""
    return PassConfig(
        content_layers={"conv4_1": 1.0},
        style_layers={"conv3_1": 1.0 / 3.0, "conv4_1": 1.0 / 3.0, "conv5_1": 1.0 / 3.0},
        mapping="independent",
        target_mode="all",
        w_s=w_s,
        iterations=iterations,
    )


def pass2_config(w_s: float = 5.0, w_hist: float = 5.0, w_tv: float = 0.0,
                 iterations: int = DEFAULT_ITERATIONS) -> PassConfig:
    """Refinement pass: consistent matching, deduplicated Gram targets,
    histogram and smoothness terms."""
    return PassConfig(
        content_layers={"conv4_1": 1.0},
        style_layers={name: 1.0 / 4.0 for name in
                      ("conv1_1", "conv2_1", "conv3_1", "conv4_1")},
        hist_layers={"conv1_1": 0.5, "conv4_1": 0.5},
        mapping="consistent",
        target_mode="unique",
        ref_layer="conv4_1",
        w_s=w_s,
        w_hist=w_hist,
        w_tv=w_tv,
        iterations=iterations,
    )


@dataclass
class PassResult:
    image: np.ndarray
    report: OptimizeReport
    mapping: MappingField
    breakdown_start: dict[str, float]
    breakdown_end: dict[str, float]


@dataclass
class TwoPassResult:
    intermediate: np.ndarray  # after pass 1
    output: np.ndarray        # after pass 2
    pass1: PassResult
    pass2: PassResult


def dilate_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """Pixels within ``radius`` (Euclidean) of the mask, mask included."""
    m = np.asarray(mask) != 0
    if radius <= 0 or not m.any():
        return m.copy()
    return distance_transform_edt(~m) <= radius


def _validate_inputs(image, mask, style, cfg, bank):
    if image.shape != style.shape:
        raise HarmonizeError(
            f"input {image.shape} and painting {style.shape} sizes differ")
    if mask.shape != image.shape[:2]:
        raise HarmonizeError(
            f"mask {mask.shape} does not match image {image.shape[:2]}")
    names = set(bank.layer_names)
    missing = cfg.all_layers() - names
    if missing:
        raise HarmonizeError(f"configured layer(s) not in weight bank: {sorted(missing)}")
    for name in sorted(cfg.all_layers()):
        if not resize_mask(mask, name).any():
            raise HarmonizeError(f"mask resizes to empty at layer {name!r}")


def single_pass(image: np.ndarray, mask: np.ndarray, style: np.ndarray,
                cfg: PassConfig, bank: backbone.WeightBank,
                content_image: np.ndarray | None = None,
                dilation_radius: int = DEFAULT_DILATION,
                grad_tol: float = DEFAULT_GRAD_TOL,
                dtype=np.float32,
                callback=None,
                trace_sink: list | None = None) -> PassResult:
    """One harmonization pass; returns the composited, clamped result.

    The content target is taken from ``content_image`` when given (the
    refinement pass preserves the original element, not the pass-1
    output); the mask region is optimized starting from ``image``.
    """
    image = np.asarray(image, dtype=np.float64)
    style = np.asarray(style, dtype=np.float64)
    _validate_inputs(image, mask, style, cfg, bank)

    map_layers = cfg.mapping_layers()
    wanted = map_layers | set(cfg.content_layers)
    f_work = backbone.forward(image, bank, wanted, dtype=dtype)
    f_style = backbone.forward(style, bank, map_layers, dtype=dtype)

    if cfg.mapping == "independent":
        mapping = independent_mapping(
            {k: f_work[k] for k in map_layers}, mask, f_style)
    elif cfg.mapping == "consistent":
        if not cfg.ref_layer:
            raise HarmonizeError("consistent mapping needs a reference layer")
        mapping = consistent_mapping(
            {k: f_work[k] for k in map_layers}, mask, f_style, cfg.ref_layer)
    else:
        raise HarmonizeError(f"unknown mapping kind {cfg.mapping!r}")

    targets = build_style_targets(f_style, mapping, mode=cfg.target_mode)
    if content_image is None:
        f_content = {k: f_work[k] for k in cfg.content_layers}
    else:
        f_content = backbone.forward(np.asarray(content_image, dtype=np.float64),
                                     bank, set(cfg.content_layers), dtype=dtype)
    ref, masks = content_targets(f_content, mask, cfg.content_layers)
    targets.content.update(ref)
    targets.masks.update(masks)

    # style terms compare Grams over D' in-mask vectors; dividing beta by
    # D'^2 keeps their magnitude independent of the mask size, so the
    # estimator's weight scale carries across inputs
    betas = {}
    for name, beta in cfg.style_layers.items():
        d_in = int(targets.masks[name].sum())
        betas[name] = beta / float(d_in * d_in)
    loss_cfg = LossConfig(alphas=dict(cfg.content_layers),
                          betas=betas,
                          gammas=dict(cfg.hist_layers),
                          w_s=cfg.w_s, w_hist=cfg.w_hist, w_tv=cfg.w_tv)
    region = dilate_mask(mask, dilation_radius)
    active = np.repeat(region.ravel(), 3)
    shape = image.shape

    def objective(x):
        loss, grad, breakdown = total_loss(x.reshape(shape), bank, targets,
                                           loss_cfg, tv_mask=region, dtype=dtype)
        if trace_sink is not None:
            trace_sink.append(breakdown)
        return loss, grad.ravel()

    x_opt, report = lbfgs_minimize(objective, image.ravel(),
                                   max_iters=cfg.iterations,
                                   grad_tol=grad_tol, active_mask=active,
                                   callback=callback)

    optimized = x_opt.reshape(shape)
    out = style.copy()
    out[region] = np.clip(optimized[region], 0.0, 1.0)

    _, _, bd_start = total_loss(image, bank, targets, loss_cfg,
                                tv_mask=region, dtype=dtype)
    _, _, bd_end = total_loss(optimized, bank, targets, loss_cfg,
                              tv_mask=region, dtype=dtype)
    return PassResult(out, report, mapping, bd_start, bd_end)


def two_pass(image: np.ndarray, mask: np.ndarray, style: np.ndarray,
             bank: backbone.WeightBank,
             cfg1: PassConfig | None = None,
             cfg2: PassConfig | None = None,
             dilation_radius: int = DEFAULT_DILATION,
             dtype=np.float32,
             callback=None) -> TwoPassResult:
    """Both harmonization passes; pass 2 starts from the pass-1 result but
    keeps the original composite as its content reference."""
    cfg1 = cfg1 or pass1_config()
    cfg2 = cfg2 or pass2_config()
    r1 = single_pass(image, mask, style, cfg1, bank,
                     dilation_radius=dilation_radius, dtype=dtype,
                     callback=callback)
    r2 = single_pass(r1.image, mask, style, cfg2, bank, content_image=image,
                     dilation_radius=dilation_radius, dtype=dtype,
                     callback=callback)
    return TwoPassResult(r1.image, r2.image, r1, r2)


# ---------------------------------------------------------------------------
# Input preparation


def _resize_float(channel: np.ndarray, size: tuple[int, int],
                  resample) -> np.ndarray:
    img = Image.fromarray(channel.astype(np.float32), mode="F")
    return np.asarray(img.resize(size, resample), dtype=np.float64)


def resize_image(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bicubic resize of an HxWx3 float image to (width, height)."""
    return np.clip(np.stack([_resize_float(image[..., c], size, Image.Resampling.BICUBIC)
                             for c in range(3)], axis=2), 0.0, 1.0)


def resize_inputs(image: np.ndarray, mask: np.ndarray, style: np.ndarray,
                  max_dim: int = MAX_DIMENSION):
    """Scale the triple so the longest side is at most ``max_dim``.

    Images are resampled bicubically; the mask keeps its majority-coverage
    semantics (area average >= 0.5).
    """
    h, w = image.shape[:2]
    longest = max(h, w)
    if longest <= max_dim:
        return image, np.asarray(mask) != 0, style
    scale = max_dim / longest
    size = (max(int(round(w * scale)), 3), max(int(round(h * scale)), 3))
    coverage = _resize_float((np.asarray(mask) != 0).astype(np.float32), size,
                             Image.Resampling.BOX)
    return (resize_image(image, size), coverage >= 0.5, resize_image(style, size))
