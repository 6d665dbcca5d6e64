"""Reconstruction losses and their gradients.

All terms operate on masked activations: content and histogram sums run
over in-mask positions only, and Gram statistics are built from in-mask
activation vectors.  Unique-mode style targets keep each mapped style
vector once and are rescaled to the in-mask vector count so they stay
comparable with the output's Gram.  The histogram remap is recomputed at
every evaluation but treated as a constant by the gradient (it is
piecewise constant in the activations, so this is the a.e. derivative).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backbone
from .mapping import MappingField, resize_mask

HIST_BINS = 256


class LossError(ValueError):
    pass


@dataclass
class LossConfig:
    """Per-layer coefficients and global term weights for one pass."""

    alphas: dict[str, float] = field(default_factory=dict)
    betas: dict[str, float] = field(default_factory=dict)
    gammas: dict[str, float] = field(default_factory=dict)
    w_s: float = 1.0
    w_hist: float = 0.0
    w_tv: float = 0.0
    tau: float | None = None

    def layers(self) -> set[str]:
        used = {n for n, a in self.alphas.items() if a > 0}
        used |= {n for n, b in self.betas.items() if b > 0}
        used |= {n for n, g in self.gammas.items() if g > 0}
        return used


@dataclass
class StyleTargets:
    """Targets gathered from the style image through a mapping field."""

    grams: dict[str, tuple[np.ndarray, int]]  # layer -> (target Gram, gathered count)
    hist_values: dict[str, np.ndarray]        # layer -> (N, n) mapped style activations
    masks: dict[str, np.ndarray]              # layer -> (H_l, W_l) bool
    content: dict[str, np.ndarray] = field(default_factory=dict)  # layer -> (N, H, W)


def gram(f: np.ndarray) -> np.ndarray:
    """Gram matrix F F^T of an (N, D) activation matrix."""
    return f @ f.T


def build_style_targets(f_style: dict[str, np.ndarray], mapping: MappingField,
                        mode: str = "all") -> StyleTargets:
    """Gather mapped style vectors per layer and pool them into targets.

    mode="unique" drops repeated style indices (first occurrence in patch
    order wins) so each style vector contributes to the Gram at most
    once; histogram targets always keep the full multiset.  The stored
    Gram is count-normalized onto the in-mask scale (x D'/n), which makes
    it directly comparable with a Gram over the D' in-mask output
    vectors even when the mapping is many-to-one.
    """
    if mode not in ("all", "unique"):
        raise LossError(f"unknown target mode {mode!r}")
    grams, hist_values, masks = {}, {}, {}
    for name, fld in mapping.layers.items():
        act = f_style[name]
        n_ch = act.shape[0]
        flat = act.reshape(n_ch, -1)
        domain = mapping.domain(name)
        if domain.size == 0:
            raise LossError(f"layer {name!r}: mapping field is empty")
        targets = fld[domain]
        gathered = flat[:, targets]
        hist_values[name] = gathered
        if mode == "unique":
            _, first = np.unique(targets, return_index=True)
            kept = flat[:, targets[np.sort(first)]]
        else:
            kept = gathered
        count = kept.shape[1]
        scale = domain.size / count  # exactly 1.0 for mode="all"
        grams[name] = (gram(kept.astype(np.float64)) * scale, count)
        masks[name] = fld.reshape(mapping.input_grids[name]) >= 0
    return StyleTargets(grams, hist_values, masks)


def content_targets(f_input: dict[str, np.ndarray], mask: np.ndarray,
                    layers) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Content activations plus their per-layer resized masks."""
    targets = {name: f_input[name].copy() for name in layers}
    masks = {name: resize_mask(mask, name) for name in layers}
    return targets, masks


def content_loss_and_grad(stack, targets: StyleTargets, alphas):
    total = 0.0
    grads = {}
    for name, alpha in alphas.items():
        if alpha <= 0:
            continue
        mask = targets.masks[name].ravel()
        d_in = int(mask.sum())
        if d_in == 0:
            raise LossError(f"layer {name!r}: empty mask with nonzero content weight")
        n_ch = stack[name].shape[0]
        f_out = stack[name].reshape(n_ch, -1)
        f_ref = targets.content[name].reshape(n_ch, -1)
        diff = f_out[:, mask] - f_ref[:, mask]
        total += alpha / (2.0 * n_ch * d_in) * float(np.sum(
            diff.astype(np.float64) ** 2))
        g = np.zeros_like(f_out)
        g[:, mask] = (alpha / (n_ch * d_in)) * diff
        grads[name] = g.reshape(stack[name].shape)
    return total, grads


def style_loss_gram(stack, targets: StyleTargets, betas):
    total = 0.0
    grads = {}
    for name, beta in betas.items():
        if beta <= 0:
            continue
        mask = targets.masks[name].ravel()
        if not mask.any():
            raise LossError(f"layer {name!r}: no in-mask activations for style loss")
        n_ch = stack[name].shape[0]
        f_out = stack[name].reshape(n_ch, -1)
        fm = f_out[:, mask].astype(np.float64)
        g_out = gram(fm)
        diff = g_out - targets.grams[name][0]
        total += beta / (2.0 * n_ch ** 2) * float(np.sum(diff ** 2))
        dg = (beta / n_ch ** 2) * diff
        dfm = (dg + dg.T) @ fm
        g = np.zeros_like(f_out)
        g[:, mask] = dfm.astype(f_out.dtype)
        grads[name] = g.reshape(stack[name].shape)
    return total, grads


def histmatch(values_out: np.ndarray, values_style: np.ndarray) -> np.ndarray:
    """Remap each output value to the style value at its CDF quantile.

    The output CDF uses 256 uniform bins over the pooled min-max range;
    the style quantile is read off the sorted style values, so equal-count
    inputs remap exactly onto style values.
    """
    out = np.asarray(values_out, dtype=np.float64)
    style = np.sort(np.asarray(values_style, dtype=np.float64))
    if out.size == 0 or style.size == 0:
        raise LossError("histogram matching needs nonempty value lists")
    lo = min(out.min(), style[0])
    hi = max(out.max(), style[-1])
    if hi == lo:
        return np.full_like(out, style[-1])
    width = (hi - lo) / HIST_BINS
    bins = np.clip(((out - lo) / width).astype(np.int64), 0, HIST_BINS - 1)
    counts = np.bincount(bins, minlength=HIST_BINS)
    cdf = np.cumsum(counts) / out.size
    quantiles = cdf[bins]
    ranks = np.clip(np.ceil(quantiles * style.size).astype(np.int64) - 1,
                    0, style.size - 1)
    return style[ranks]


def histogram_loss_and_grad(stack, targets: StyleTargets, gammas):
    total = 0.0
    grads = {}
    for name, gamma in gammas.items():
        if gamma <= 0:
            continue
        mask = targets.masks[name].ravel()
        n_ch = stack[name].shape[0]
        f_out = stack[name].reshape(n_ch, -1)
        g = np.zeros_like(f_out)
        style_vals = targets.hist_values[name]
        for i in range(n_ch):
            vals = f_out[i, mask]
            remapped = histmatch(vals, style_vals[i])
            diff = vals.astype(np.float64) - remapped
            total += gamma * float(np.sum(diff ** 2))
            g[i, mask] = (2.0 * gamma * diff).astype(f_out.dtype)
        grads[name] = g.reshape(stack[name].shape)
    return total, grads


def tv_loss_and_grad(image: np.ndarray, mask: np.ndarray | None = None):
    """Summed squared differences of neighboring pixels, per channel.

    Only pairs with both endpoints inside ``mask`` contribute; pairs with
    an out-of-range neighbor are skipped.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w, _ = img.shape
    if mask is None:
        m = np.ones((h, w), dtype=bool)
    else:
        m = np.asarray(mask) != 0
    grad = np.zeros_like(img)
    total = 0.0
    dy = img[1:, :, :] - img[:-1, :, :]
    pair_y = (m[1:, :] & m[:-1, :])[:, :, None]
    total += float(np.sum(dy ** 2 * pair_y))
    grad[1:, :, :] += 2.0 * dy * pair_y
    grad[:-1, :, :] -= 2.0 * dy * pair_y
    dx = img[:, 1:, :] - img[:, :-1, :]
    pair_x = (m[:, 1:] & m[:, :-1])[:, :, None]
    total += float(np.sum(dx ** 2 * pair_x))
    grad[:, 1:, :] += 2.0 * dx * pair_x
    grad[:, :-1, :] -= 2.0 * dx * pair_x
    if image.ndim == 2:
        grad = grad[:, :, 0]
    return total, grad


def total_loss(image: np.ndarray, bank: backbone.WeightBank,
               targets: StyleTargets, config: LossConfig,
               tv_mask: np.ndarray | None = None, dtype=np.float32):
    """Composed pass loss and its image-space gradient.

    Returns (loss, grad_image, breakdown); terms with zero weight are
    skipped entirely, so a pass-1 config evaluates exactly L_c + w_s L_s.
    """
    wanted = config.layers()
    stack, cache = backbone.forward_cached(image, bank, wanted, dtype=dtype)

    breakdown = {"content": 0.0, "style": 0.0, "hist": 0.0, "tv": 0.0}
    layer_grads: dict[str, np.ndarray] = {}

    def accumulate(term, grads, weight):
        for name, g in grads.items():
            scaled = weight * g
            if name in layer_grads:
                layer_grads[name] = layer_grads[name] + scaled
            else:
                layer_grads[name] = scaled

    l_c, g_c = content_loss_and_grad(stack, targets, config.alphas)
    breakdown["content"] = l_c
    accumulate("content", g_c, 1.0)

    if config.w_s > 0 and config.betas:
        l_s, g_s = style_loss_gram(stack, targets, config.betas)
        breakdown["style"] = l_s
        accumulate("style", g_s, config.w_s)

    if config.w_hist > 0 and config.gammas:
        l_h, g_h = histogram_loss_and_grad(stack, targets, config.gammas)
        breakdown["hist"] = l_h
        accumulate("hist", g_h, config.w_hist)

    if layer_grads:
        grad = backbone.backward(image, bank, layer_grads, cache=cache)
    else:
        grad = np.zeros(image.shape, dtype=dtype)
    grad = grad.astype(np.float64)

    if config.w_tv > 0:
        l_tv, g_tv = tv_loss_and_grad(image, tv_mask)
        breakdown["tv"] = l_tv
        grad += config.w_tv * g_tv

    total = (breakdown["content"] + config.w_s * breakdown["style"]
             + config.w_hist * breakdown["hist"] + config.w_tv * breakdown["tv"])
    breakdown["total"] = total
    return total, grad, breakdown
