"""Input-to-style patch correspondence fields.

Activations at each layer are treated as a grid of "neural patches": the
3x3 neighborhood of a location stacked across all filters, zero-padded
at the borders.  Pass 1 matches patches independently per layer; pass 2
matches only at a reference layer, removes spatial outliers by
neighborhood voting, and propagates that single consistent field to the
remaining layers so all scales draw from the same painting location.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backbone import layer_scale

# clockwise from north; also the tie-break order for consistency votes
NEIGHBOR_OFFSETS = (
    (0, -1),   # N
    (1, -1),   # NE
    (1, 0),    # E
    (1, 1),    # SE
    (0, 1),    # S
    (-1, 1),   # SW
    (-1, 0),   # W
    (-1, -1),  # NW
)


class MappingError(ValueError):
    pass


@dataclass
class MappingField:
    """Per-layer map from in-mask input patch index to style patch index.

    ``layers[name]`` is an int64 array over the layer's patch grid,
    row-major, with -1 marking patches outside the resized mask.
    """

    layers: dict[str, np.ndarray]
    input_grids: dict[str, tuple[int, int]]   # (H, W) per layer
    style_grids: dict[str, tuple[int, int]]
    ref_layer: str | None = None

    def domain(self, name: str) -> np.ndarray:
        """Flat indices of mapped (in-mask) patches at a layer."""
        return np.flatnonzero(self.layers[name] >= 0)

    def targets(self, name: str) -> np.ndarray:
        """Style patch indices for the layer's domain, in domain order."""
        return self.layers[name][self.domain(name)]

    def to_triples(self) -> list[tuple[str, int, int]]:
        out = []
        for name in self.layers:
            for p in self.domain(name):
                out.append((name, int(p), int(self.layers[name][p])))
        return out

    def dump_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_triples()))


def resize_mask(mask: np.ndarray, layer: str) -> np.ndarray:
    """Mask at a layer's resolution: cell coverage fraction >= 0.5."""
    m = np.asarray(mask) != 0
    s = layer_scale(layer)
    h, w = m.shape
    hl, wl = h // s, w // s
    if s == 1:
        return m.copy()
    frac = m[: hl * s, : wl * s].reshape(hl, s, wl, s).mean(axis=(1, 3))
    return frac >= 0.5


def extract_patches(features: np.ndarray) -> np.ndarray:
    """(N, H, W) activations -> (H*W, 9N) matrix of 3x3 neighborhoods.

    Row p stacks, filter by filter, the 3x3 window centered on location p
    in row-major tap order, zero-padded outside the grid.
    """
    n, h, w = features.shape
    padded = np.zeros((n, h + 2, w + 2), dtype=features.dtype)
    padded[:, 1:-1, 1:-1] = features
    out = np.empty((h * w, n, 9), dtype=features.dtype)
    for ky in range(3):
        for kx in range(3):
            out[:, :, ky * 3 + kx] = padded[:, ky:ky + h, kx:kx + w].reshape(n, h * w).T
    return out.reshape(h * w, n * 9)


def nearest_neighbor_index(query: np.ndarray, candidates: np.ndarray) -> int:
    """Index of the squared-L2-nearest candidate; ties go to the lowest."""
    if candidates.shape[0] == 0:
        raise MappingError("empty candidate set")
    diff = candidates.astype(np.float64) - query.astype(np.float64)
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def _nearest_neighbors(queries: np.ndarray, candidates: np.ndarray,
                       chunk: int = 256) -> np.ndarray:
    """Row-wise nearest candidate indices, computed in chunks."""
    if candidates.shape[0] == 0:
        raise MappingError("empty candidate set")
    cand = candidates.astype(np.float64)
    cand_sq = np.einsum("ij,ij->i", cand, cand)
    out = np.empty(queries.shape[0], dtype=np.int64)
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk].astype(np.float64)
        d = np.einsum("ij,ij->i", q, q)[:, None] - 2.0 * (q @ cand.T) + cand_sq[None, :]
        out[start:start + chunk] = np.argmin(d, axis=1)
    return out


def change_resolution(p: int, from_grid: tuple[int, int],
                      to_grid: tuple[int, int]) -> int:
    """Map a flat patch index between layer grids (floor scaling, clamped)."""
    hf, wf = from_grid
    ht, wt = to_grid
    x, y = p % wf, p // wf
    xt = min(max(x * wt // wf, 0), wt - 1)
    yt = min(max(y * ht // hf, 0), ht - 1)
    return yt * wt + xt


def _grids(stack: dict[str, np.ndarray]) -> dict[str, tuple[int, int]]:
    return {name: act.shape[1:] for name, act in stack.items()}


def independent_mapping(f_input: dict[str, np.ndarray], mask: np.ndarray,
                        f_style: dict[str, np.ndarray]) -> MappingField:
    """Per-layer nearest-neighbor assignment, each layer matched alone."""
    if set(f_input) != set(f_style):
        raise MappingError("input and style stacks cover different layers")
    layers = {}
    for name, act in f_input.items():
        m = resize_mask(mask, name)
        fld = np.full(act.shape[1] * act.shape[2], -1, dtype=np.int64)
        inside = np.flatnonzero(m.ravel())
        if inside.size:
            patches_in = extract_patches(act)
            patches_style = extract_patches(f_style[name])
            fld[inside] = _nearest_neighbors(patches_in[inside], patches_style)
        layers[name] = fld
    return MappingField(layers, _grids(f_input), _grids(f_style))


def spatial_consistency(assignment: np.ndarray, style_patches: np.ndarray,
                        mask: np.ndarray, style_grid: tuple[int, int]) -> np.ndarray:
    """One voting sweep that snaps each match toward its neighbors'.

    For each in-mask patch the candidates are its own assignment plus the
    neighbors' assignments shifted back by the neighbor offset; the
    winner minimizes the summed squared distance to the neighbors' style
    patches.  Reads the pre-vote field only, so patch order is irrelevant.
    """
    m = np.asarray(mask) != 0
    h, w = m.shape
    hs, ws = style_grid
    out = assignment.copy()
    sp = style_patches.astype(np.float64)
    for p in np.flatnonzero(m.ravel()):
        x, y = int(p % w), int(p // w)
        neighbor_q = []
        candidates = [int(assignment[p])]
        for ox, oy in NEIGHBOR_OFFSETS:
            nx, ny = x + ox, y + oy
            if not (0 <= nx < w and 0 <= ny < h and m[ny, nx]):
                continue
            q = int(assignment[ny * w + nx])
            neighbor_q.append(q)
            cx, cy = q % ws - ox, q // ws - oy
            if 0 <= cx < ws and 0 <= cy < hs:
                shifted = cy * ws + cx
                if shifted not in candidates:
                    candidates.append(shifted)
        if not neighbor_q or len(candidates) == 1:
            continue
        diff = sp[candidates][:, None, :] - sp[neighbor_q][None, :, :]
        scores = np.einsum("cnd,cnd->c", diff, diff)
        out[p] = candidates[int(np.argmin(scores))]
    return out


def consistent_mapping(f_input: dict[str, np.ndarray], mask: np.ndarray,
                       f_style: dict[str, np.ndarray], ref_layer: str) -> MappingField:
    """Reference-layer matching, outlier voting, propagation to all layers."""
    if ref_layer not in f_input or ref_layer not in f_style:
        raise MappingError(f"reference layer {ref_layer!r} missing from stacks")
    if set(f_input) != set(f_style):
        raise MappingError("input and style stacks cover different layers")
    input_grids = _grids(f_input)
    style_grids = _grids(f_style)
    ref_grid = input_grids[ref_layer]
    ref_mask = resize_mask(mask, ref_layer)
    ref_inside = np.flatnonzero(ref_mask.ravel())

    layer_masks = {name: resize_mask(mask, name) for name in f_input}

    # the reference field must also cover patches that only project into
    # the mask from finer/coarser layers (cell coverage is not nested)
    needed = set(int(p) for p in ref_inside)
    for name, m in layer_masks.items():
        if name == ref_layer:
            continue
        for p in np.flatnonzero(m.ravel()):
            needed.add(change_resolution(int(p), input_grids[name], ref_grid))
    needed = np.array(sorted(needed), dtype=np.int64)

    ref_field = np.full(ref_grid[0] * ref_grid[1], -1, dtype=np.int64)
    if needed.size:
        ref_patches = extract_patches(f_input[ref_layer])
        style_patches = extract_patches(f_style[ref_layer])
        ref_field[needed] = _nearest_neighbors(ref_patches[needed], style_patches)
        ref_field = spatial_consistency(ref_field, style_patches, ref_mask,
                                        style_grids[ref_layer])

    layers = {}
    ref_style_grid = style_grids[ref_layer]
    for name, m in layer_masks.items():
        if name == ref_layer:
            fld = ref_field.copy()
            fld[~ref_mask.ravel()] = -1  # exposed domain is the resized mask
            layers[name] = fld
            continue
        grid = input_grids[name]
        sgrid = style_grids[name]
        h, w = grid
        hs, ws = sgrid
        fld = np.full(h * w, -1, dtype=np.int64)
        for p in np.flatnonzero(m.ravel()):
            x, y = int(p % w), int(p // w)
            p_ref = change_resolution(int(p), grid, ref_grid)
            q_ref = int(ref_field[p_ref])
            # carry the patch's offset within its reference cell over to the
            # matched style cell, so the match is at the same image location
            base = change_resolution(p_ref, ref_grid, grid)
            q_base = change_resolution(q_ref, ref_style_grid, sgrid)
            qx = min(max(q_base % ws + (x - base % w), 0), ws - 1)
            qy = min(max(q_base // ws + (y - base // w), 0), hs - 1)
            fld[p] = qy * ws + qx
        layers[name] = fld
    return MappingField(layers, input_grids, style_grids, ref_layer=ref_layer)
