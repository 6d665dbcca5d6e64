"""Convolutional feature extractor: the VGG-19 prefix evaluated with numpy.

Activations are computed through ``conv5_1`` at most (3x3 convolutions,
ReLU, 2x2/stride-2 max pooling between blocks).  Weights come from a
portable little-endian binary file (magic ``NPHW``) so the package has no
deep-learning framework dependency.  Both the forward pass and the
gradient of a scalar loss with respect to the input image are provided;
the backward pass reuses the ReLU gates and pooling argmaxes of a paired
forward pass, so results are exactly consistent.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"NPHW"
VERSION = 1

_NAME_RE = re.compile(r"^conv(\d+)_(\d+)$")


class WeightFormatError(ValueError):
    """Raised when a weight file is malformed or violates bank invariants."""


class ConfigurationError(ValueError):
    """Raised on shape/channel mismatches or unknown layer names."""


@dataclass
class ConvLayer:
    name: str
    weights: np.ndarray  # (out_channels, in_channels, kh, kw) float32
    bias: np.ndarray     # (out_channels,) float32

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]


@dataclass
class WeightBank:
    """Ordered conv layers plus the preprocessing channel means.

    Layer names must follow the ``conv{block}_{index}`` convention in
    standard order (conv1_1, conv1_2, conv2_1, ...).  Pooling positions
    are implied by the names: a 2x2 max pool sits before every layer that
    starts a new block.
    """

    layers: list[ConvLayer]
    channel_means: np.ndarray  # (3,) float32, applied after scaling to 0-255

    def __post_init__(self) -> None:
        self.channel_means = np.asarray(self.channel_means, dtype=np.float32)
        validate_bank(self)

    @property
    def layer_names(self) -> list[str]:
        return [layer.name for layer in self.layers]

    @property
    def pool_before(self) -> list[bool]:
        """True where a max pool precedes the layer."""
        blocks = [block_of(layer.name) for layer in self.layers]
        return [i > 0 and blocks[i] > blocks[i - 1] for i in range(len(blocks))]

    def layer(self, name: str) -> ConvLayer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise ConfigurationError(f"unknown layer name {name!r}")


def block_of(name: str) -> int:
    """Block number encoded in a conv layer name (conv3_1 -> 3)."""
    m = _NAME_RE.match(name)
    if m is None:
        raise ConfigurationError(f"layer name {name!r} does not match conv{{block}}_{{index}}")
    return int(m.group(1))


def layer_scale(name: str) -> int:
    """Downsampling factor of a layer relative to the input image."""
    return 2 ** (block_of(name) - 1)


def validate_bank(bank: WeightBank) -> None:
    if not bank.layers:
        raise WeightFormatError("weight bank contains no layers")
    if bank.channel_means.shape != (3,):
        raise WeightFormatError("channel means must have exactly 3 entries")
    prev_block, prev_index = 1, 0
    for layer in bank.layers:
        m = _NAME_RE.match(layer.name)
        if m is None:
            raise WeightFormatError(f"layer {layer.name!r}: bad name pattern")
        block, index = int(m.group(1)), int(m.group(2))
        ok = (block == prev_block and index == prev_index + 1) or (
            block == prev_block + 1 and index == 1
        )
        if not ok:
            raise WeightFormatError(
                f"layer {layer.name!r}: out of order after conv{prev_block}_{prev_index}"
            )
        prev_block, prev_index = block, index
        if layer.weights.ndim != 4:
            raise WeightFormatError(f"layer {layer.name!r}: weights must be 4-D")
        kh, kw = layer.weights.shape[2:]
        if (kh, kw) != (3, 3):
            raise WeightFormatError(f"layer {layer.name!r}: kernel must be 3x3, got {kh}x{kw}")
        if layer.bias.shape != (layer.weights.shape[0],):
            raise WeightFormatError(
                f"layer {layer.name!r}: bias length {layer.bias.shape[0]}"
                f" != out_channels {layer.weights.shape[0]}"
            )
    for prev, cur in zip(bank.layers, bank.layers[1:]):
        if cur.in_channels != prev.out_channels:
            raise WeightFormatError(
                f"layer {cur.name!r}: in_channels {cur.in_channels}"
                f" != previous out_channels {prev.out_channels}"
            )
    if bank.layers[0].in_channels != 3:
        raise WeightFormatError(
            f"layer {bank.layers[0].name!r}: first layer must take 3 input channels"
        )


# ---------------------------------------------------------------------------
# Binary weight file


def load_weights(path: str | Path) -> WeightBank:
    """Parse an NPHW weight file, checking every bank invariant."""
    data = Path(path).read_bytes()
    off = 0

    def need(n: int, what: str, layer: str | None = None) -> int:
        nonlocal off
        if off + n > len(data):
            where = f" in layer {layer!r}" if layer else ""
            raise WeightFormatError(
                f"truncated file: need {n} bytes for {what}{where} at byte {off},"
                f" have {len(data) - off}"
            )
        start = off
        off += n
        return start

    magic = data[need(4, "magic"):4]
    if magic != MAGIC:
        raise WeightFormatError(f"bad magic {magic!r} at byte 0, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", data, need(4, "version"))
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version} at byte 4")
    means = np.frombuffer(data, dtype="<f4", count=3, offset=need(12, "channel means")).copy()
    (n_layers,) = struct.unpack_from("<I", data, need(4, "layer count"))

    layers = []
    for i in range(n_layers):
        (name_len,) = struct.unpack_from("<H", data, need(2, "name length"))
        start = need(name_len, "layer name")
        try:
            name = data[start:start + name_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WeightFormatError(f"layer {i}: undecodable name at byte {start}") from exc
        oc, ic, kh, kw = struct.unpack_from("<IIII", data, need(16, "layer shape", name))
        n_w = oc * ic * kh * kw
        w_off = need(4 * n_w, f"{n_w} weight floats", name)
        weights = np.frombuffer(data, dtype="<f4", count=n_w, offset=w_off)
        b_off = need(4 * oc, f"{oc} bias floats", name)
        bias = np.frombuffer(data, dtype="<f4", count=oc, offset=b_off).copy()
        if (kh, kw) != (3, 3):
            raise WeightFormatError(
                f"layer {name!r}: kernel must be 3x3, got {kh}x{kw} (at byte {w_off - 16})"
            )
        layers.append(ConvLayer(name, weights.reshape(oc, ic, kh, kw).copy(), bias))

    if off != len(data):
        raise WeightFormatError(f"{len(data) - off} trailing bytes after layer {n_layers - 1}")
    return WeightBank(layers, means)


def save_weights(bank: WeightBank, path: str | Path) -> None:
    """Write a WeightBank in the NPHW format (bit-preserving for f32)."""
    parts = [MAGIC, struct.pack("<I", VERSION)]
    parts.append(np.asarray(bank.channel_means, dtype="<f4").tobytes())
    parts.append(struct.pack("<I", len(bank.layers)))
    for layer in bank.layers:
        name = layer.name.encode("utf-8")
        parts.append(struct.pack("<H", len(name)))
        parts.append(name)
        oc, ic, kh, kw = layer.weights.shape
        parts.append(struct.pack("<IIII", oc, ic, kh, kw))
        parts.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


# ---------------------------------------------------------------------------
# Forward / backward


def conv2d(x: np.ndarray, layer: ConvLayer, dtype=np.float32) -> np.ndarray:
    """3x3 stride-1 cross-correlation with zero padding 1, plus bias."""
    if x.shape[0] != layer.in_channels:
        raise ConfigurationError(
            f"layer {layer.name!r}: input has {x.shape[0]} channels,"
            f" expected {layer.in_channels}"
        )
    c_in, h, w = x.shape
    weights = layer.weights.astype(dtype, copy=False)
    padded = np.zeros((c_in, h + 2, w + 2), dtype=dtype)
    padded[:, 1:-1, 1:-1] = x
    out = np.empty((layer.out_channels, h * w), dtype=dtype)
    out[:] = layer.bias.astype(dtype, copy=False)[:, None]
    for ky in range(3):
        for kx in range(3):
            window = padded[:, ky:ky + h, kx:kx + w].reshape(c_in, h * w)
            out += weights[:, :, ky, kx] @ window
    return out.reshape(layer.out_channels, h, w)


def _conv2d_input_grad(dy: np.ndarray, layer: ConvLayer, dtype) -> np.ndarray:
    c_out, h, w = dy.shape
    weights = layer.weights.astype(dtype, copy=False)
    dpad = np.zeros((layer.in_channels, h + 2, w + 2), dtype=dtype)
    dy_flat = dy.reshape(c_out, h * w)
    for ky in range(3):
        for kx in range(3):
            dpad[:, ky:ky + h, kx:kx + w] += (
                weights[:, :, ky, kx].T @ dy_flat
            ).reshape(layer.in_channels, h, w)
    return dpad[:, 1:-1, 1:-1]


def _pool_forward(x: np.ndarray):
    c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    windows = (
        x[:, : 2 * h2, : 2 * w2]
        .reshape(c, h2, 2, w2, 2)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, h2, w2, 4)
    )
    # argmax picks the first maximum in row-major window order
    arg = np.argmax(windows, axis=3)
    out = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]
    return out, arg


def _pool_backward(dy: np.ndarray, arg: np.ndarray, in_shape) -> np.ndarray:
    c, h, w = in_shape
    h2, w2 = h // 2, w // 2
    dwin = np.zeros((c, h2, w2, 4), dtype=dy.dtype)
    np.put_along_axis(dwin, arg[..., None], dy[..., None], axis=3)
    dx = np.zeros((c, h, w), dtype=dy.dtype)
    dx[:, : 2 * h2, : 2 * w2] = (
        dwin.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, 2 * h2, 2 * w2)
    )
    return dx


@dataclass
class _ForwardCache:
    bank: WeightBank
    image_shape: tuple
    dtype: type
    relu_masks: list[np.ndarray] = field(default_factory=list)
    pool_args: list = field(default_factory=list)  # (argmax, in_shape) or None
    depth: int = 0


def _check_wanted(image: np.ndarray, bank: WeightBank, wanted) -> int:
    """Index one past the deepest wanted layer; validates sizes and names."""
    names = bank.layer_names
    unknown = set(wanted) - set(names)
    if unknown:
        raise ConfigurationError(f"unknown layer name(s): {sorted(unknown)}")
    if not wanted:
        return 0
    deepest = max(names.index(n) for n in wanted)
    scale = layer_scale(names[deepest])
    h, w = image.shape[:2]
    if h // scale < 3 or w // scale < 3:
        raise ConfigurationError(
            f"image {h}x{w} too small for layer {names[deepest]!r}"
            f" (needs at least {3 * scale} pixels per side)"
        )
    return deepest + 1


def preprocess(image: np.ndarray, bank: WeightBank, dtype=np.float32) -> np.ndarray:
    """[0,1] HxWx3 image -> mean-subtracted 0-255 CxHxW tensor."""
    x = np.ascontiguousarray(image.transpose(2, 0, 1), dtype=dtype)
    return x * dtype(255.0) - bank.channel_means.astype(dtype)[:, None, None]


def forward_cached(image: np.ndarray, bank: WeightBank, wanted, dtype=np.float32):
    """Forward pass returning (activations, cache) for a later backward()."""
    depth = _check_wanted(image, bank, wanted)
    cache = _ForwardCache(bank, image.shape, dtype, depth=depth)
    stack: dict[str, np.ndarray] = {}
    if depth == 0:
        return stack, cache
    x = preprocess(image, bank, dtype)
    pool_before = bank.pool_before
    for i in range(depth):
        layer = bank.layers[i]
        if pool_before[i]:
            in_shape = x.shape
            x, arg = _pool_forward(x)
            cache.pool_args.append((arg, in_shape))
        else:
            cache.pool_args.append(None)
        x = conv2d(x, layer, dtype)
        mask = x > 0
        x *= mask
        cache.relu_masks.append(mask)
        if layer.name in wanted:
            stack[layer.name] = x.copy()
    return stack, cache


def forward(image: np.ndarray, bank: WeightBank, wanted, dtype=np.float32):
    """Post-ReLU activations at each wanted layer, keyed by layer name."""
    stack, _ = forward_cached(image, bank, wanted, dtype)
    return stack


def backward(
    image: np.ndarray,
    bank: WeightBank,
    grad_at_layers: dict[str, np.ndarray],
    cache: _ForwardCache | None = None,
    dtype=np.float32,
):
    """Gradient of sum_l <grad_at_layers[l], F_l(image)> w.r.t. the image.

    ReLU gates and pooling argmaxes are taken from the paired forward
    pass (recomputed here unless a cache from forward_cached is given).
    """
    if cache is None:
        stack, cache = forward_cached(image, bank, set(grad_at_layers), dtype)
    else:
        dtype = cache.dtype
        stack = None
    names = bank.layer_names
    for name, g in grad_at_layers.items():
        scale = layer_scale(name)
        expect = (
            bank.layer(name).out_channels,
            image.shape[0] // scale,
            image.shape[1] // scale,
        )
        if tuple(g.shape) != expect:
            raise ConfigurationError(
                f"gradient for layer {name!r} has shape {tuple(g.shape)}, expected {expect}"
            )
    depth = max((names.index(n) for n in grad_at_layers), default=-1) + 1
    if depth == 0:
        return np.zeros(cache.image_shape, dtype=dtype)
    if depth > cache.depth:
        raise ConfigurationError("forward cache does not cover the deepest gradient layer")

    dx = None
    for i in reversed(range(depth)):
        layer = bank.layers[i]
        if dx is None:
            dx = np.zeros_like(cache.relu_masks[i], dtype=dtype)
        if layer.name in grad_at_layers:
            dx = dx + grad_at_layers[layer.name].astype(dtype, copy=False)
        dx = dx * cache.relu_masks[i]
        dx = _conv2d_input_grad(dx, layer, dtype)
        if cache.pool_args[i] is not None:
            arg, in_shape = cache.pool_args[i]
            dx = _pool_backward(dx, arg, in_shape)
    return dx.transpose(1, 2, 0) * dtype(255.0)
