"""Post-reconstruction cleanup: chrominance denoising and patch synthesis.

Optimization artifacts are mostly chromatic, so the ab channels are
smoothed with a guided filter steered by luminance.  Remaining defects
are removed by re-synthesizing a low-frequency base layer purely from
painting patches (PatchMatch correspondences, overlap averaging) while
the high-frequency detail layer is carried over unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .color import lab_to_rgb, rgb_to_lab

GUIDED_RADIUS = 2
GUIDED_EPS = 0.01  # 0.1^2, for channels scaled to [0, 1]
PATCH_SIZE = 7
PM_ITERS = 5


def _box(x: np.ndarray, r: int) -> np.ndarray:
    """(2r+1)^2 box mean with edge-replicated borders."""
    return uniform_filter(np.asarray(x, dtype=np.float64), size=2 * r + 1,
                          mode="nearest")


def guided_filter(inp: np.ndarray, guide: np.ndarray, r: int = GUIDED_RADIUS,
                  eps: float = GUIDED_EPS) -> np.ndarray:
    """Edge-preserving smoothing of ``inp`` steered by ``guide``.

    Local linear coefficients are fit per (2r+1)^2 window, box-averaged,
    and applied to the guide (He et al. construction).
    """
    if inp.shape != guide.shape:
        raise ValueError("input and guide must have the same shape")
    p = np.asarray(inp, dtype=np.float64)
    i = np.asarray(guide, dtype=np.float64)
    mean_i = _box(i, r)
    mean_p = _box(p, r)
    cov_ip = _box(i * p, r) - mean_i * mean_p
    var_i = _box(i * i, r) - mean_i * mean_i
    a = cov_ip / (var_i + eps)
    b = mean_p - a * mean_i
    return _box(a, r) * i + _box(b, r)


def denoise_chroma_lab(lab: np.ndarray) -> np.ndarray:
    """Guided-filter the ab channels with L as guide; L passes through."""
    out = np.asarray(lab, dtype=np.float64).copy()
    guide = out[..., 0] / 100.0
    for ch in (1, 2):
        scaled = (out[..., ch] + 128.0) / 255.0
        out[..., ch] = guided_filter(scaled, guide) * 255.0 - 128.0
    return out


def chrominance_denoise(image: np.ndarray) -> np.ndarray:
    """Suppress high-frequency color artifacts, keeping luminance intact."""
    return lab_to_rgb(denoise_chroma_lab(rgb_to_lab(image)))


# ---------------------------------------------------------------------------
# PatchMatch


@dataclass
class NNField:
    """Per source-patch match: target patch top-left coords and SSD."""

    coords: np.ndarray  # (Hp, Wp, 2) int64, (y, x) into the target
    dists: np.ndarray   # (Hp, Wp) float64
    patch_size: int


def _patch_ssd(src, tgt, sy, sx, ty, tx, ps):
    d = src[sy:sy + ps, sx:sx + ps] - tgt[ty:ty + ps, tx:tx + ps]
    return float(np.sum(d * d))


def patchmatch_nnf(src: np.ndarray, tgt: np.ndarray, patch_size: int = PATCH_SIZE,
                   iters: int = PM_ITERS, seed: int = 0) -> NNField:
    """Randomized nearest-neighbor field from src patches into tgt.

    Seeded random init, then alternating scanline propagation and
    exponentially decaying random search; improvements only, so the total
    distance never increases.  Deterministic for a fixed seed.
    """
    src = np.asarray(src, dtype=np.float64)
    tgt = np.asarray(tgt, dtype=np.float64)
    ps = patch_size
    hp, wp = src.shape[0] - ps + 1, src.shape[1] - ps + 1
    ht, wt = tgt.shape[0] - ps + 1, tgt.shape[1] - ps + 1
    if min(hp, wp, ht, wt) < 1:
        raise ValueError(f"images must be at least {ps} pixels per side")

    rng = np.random.default_rng(seed)
    coords = np.stack([rng.integers(0, ht, size=(hp, wp)),
                       rng.integers(0, wt, size=(hp, wp))], axis=2)
    dists = np.empty((hp, wp))
    for y in range(hp):
        for x in range(wp):
            dists[y, x] = _patch_ssd(src, tgt, y, x, coords[y, x, 0],
                                     coords[y, x, 1], ps)

    n_radii = int(np.floor(np.log2(max(ht, wt)))) + 1
    for it in range(iters):
        forward = it % 2 == 0
        ys = range(hp) if forward else range(hp - 1, -1, -1)
        xs = range(wp) if forward else range(wp - 1, -1, -1)
        step = 1 if forward else -1
        for y in ys:
            for x in xs:
                best_y, best_x = coords[y, x]
                best_d = dists[y, x]
                # propagation: shift the scan-direction neighbors' matches
                py = y - step
                if 0 <= py < hp:
                    cy, cx = coords[py, x, 0] + step, coords[py, x, 1]
                    if 0 <= cy < ht:
                        d = _patch_ssd(src, tgt, y, x, cy, cx, ps)
                        if d < best_d:
                            best_y, best_x, best_d = cy, cx, d
                px = x - step
                if 0 <= px < wp:
                    cy, cx = coords[y, px, 0], coords[y, px, 1] + step
                    if 0 <= cx < wt:
                        d = _patch_ssd(src, tgt, y, x, cy, cx, ps)
                        if d < best_d:
                            best_y, best_x, best_d = cy, cx, d
                # random search around the current best
                radius = max(ht, wt)
                for _ in range(n_radii):
                    lo_y, hi_y = max(best_y - radius, 0), min(best_y + radius, ht - 1)
                    lo_x, hi_x = max(best_x - radius, 0), min(best_x + radius, wt - 1)
                    cy = int(rng.integers(lo_y, hi_y + 1))
                    cx = int(rng.integers(lo_x, hi_x + 1))
                    d = _patch_ssd(src, tgt, y, x, cy, cx, ps)
                    if d < best_d:
                        best_y, best_x, best_d = cy, cx, d
                    radius //= 2
                    if radius < 1:
                        break
                coords[y, x] = best_y, best_x
                dists[y, x] = best_d
    return NNField(coords.astype(np.int64), dists, ps)


# ---------------------------------------------------------------------------
# Patch synthesis


def luminance(image: np.ndarray) -> np.ndarray:
    """Lab lightness of an RGB image, scaled to [0, 1]."""
    return rgb_to_lab(image)[..., 0] / 100.0


def split_base_detail(image: np.ndarray):
    """Guided-filter decomposition: base (filtered) plus detail residual."""
    guide = luminance(image)
    base = np.stack([guided_filter(image[..., c], guide) for c in range(3)],
                    axis=2)
    return base, np.asarray(image, dtype=np.float64) - base


def average_matched_patches(style: np.ndarray, nnf: NNField,
                            out_shape: tuple[int, int],
                            origin: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Average all overlapping matched style patches onto an image grid.

    ``origin`` places the NNF's patch grid inside the output image.
    Pixels covered by no patch stay zero.
    """
    style = np.asarray(style, dtype=np.float64)
    ps = nnf.patch_size
    h, w = out_shape
    num = np.zeros((h, w, style.shape[2]))
    den = np.zeros((h, w))
    hp, wp = nnf.dists.shape
    pys, pxs = np.meshgrid(np.arange(hp) + origin[0], np.arange(wp) + origin[1],
                           indexing="ij")
    pys, pxs = pys.ravel(), pxs.ravel()
    tys = nnf.coords[..., 0].ravel()
    txs = nnf.coords[..., 1].ravel()
    for dy in range(ps):
        for dx in range(ps):
            num[pys + dy, pxs + dx] += style[tys + dy, txs + dx]
            den[pys + dy, pxs + dx] += 1.0
    covered = den > 0
    num[covered] /= den[covered][:, None]
    return num


def synthesize_base(base: np.ndarray, style: np.ndarray, mask: np.ndarray,
                    patch_size: int = PATCH_SIZE, iters: int = PM_ITERS,
                    seed: int = 0) -> np.ndarray:
    """Rebuild the masked region of a base layer from painting patches.

    Matching runs over the patch rows/cols that overlap the mask; the
    result holds the overlap-averaged matched patches (zeros elsewhere).
    """
    m = np.asarray(mask) != 0
    ps = patch_size
    h, w = m.shape
    ys, xs = np.nonzero(m)
    y0 = max(int(ys.min()) - ps + 1, 0)
    x0 = max(int(xs.min()) - ps + 1, 0)
    y1 = min(int(ys.max()) + ps, h)
    x1 = min(int(xs.max()) + ps, w)
    region = np.asarray(base, dtype=np.float64)[y0:y1, x0:x1]
    nnf = patchmatch_nnf(region, style, patch_size=ps, iters=iters, seed=seed)
    return average_matched_patches(style, nnf, (h, w), origin=(y0, x0))


def patch_synthesis(image: np.ndarray, style: np.ndarray, mask: np.ndarray,
                    patch_size: int = PATCH_SIZE, iters: int = PM_ITERS,
                    seed: int = 0) -> np.ndarray:
    """Rebuild the masked region's base layer from painting patches.

    The base/detail split confines the overlap averaging to coarse
    structure, so high-frequency texture survives; pixels outside the
    mask are returned untouched.
    """
    if image.shape != style.shape:
        raise ValueError("output and painting must share a resolution")
    m = np.asarray(mask) != 0
    out = np.asarray(image, dtype=np.float64).copy()
    if not m.any():
        return out
    base, detail = split_base_detail(image)
    rebuilt = synthesize_base(base, style, mask, patch_size, iters, seed)
    out[m] = np.clip(rebuilt[m] + detail[m], 0.0, 1.0)
    return out


def full_postprocess(image: np.ndarray, style: np.ndarray, mask: np.ndarray,
                     seed: int = 0) -> np.ndarray:
    """Both cleanup stages, confined to the mask.

    Chrominance denoising runs on the whole frame for filter context, but
    only masked pixels are replaced; patch synthesis is mask-limited by
    construction, so everything outside the mask stays bit-identical.
    """
    m = np.asarray(mask) != 0
    working = np.asarray(image, dtype=np.float64)
    denoised = np.where(m[:, :, None], chrominance_denoise(working), working)
    return patch_synthesis(denoised, style, mask, seed=seed)
