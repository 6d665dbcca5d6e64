"""Shared test helpers: toy weight banks and independent reference oracles.

The reference implementations here are deliberately naive (plain loops,
no shared code with the package) so they can serve as oracles.
"""

import numpy as np

from painterly.backbone import ConvLayer, WeightBank, block_of


def toy_bank(layer_specs, seed=0, scale=0.25, means=(0.0, 0.0, 0.0)):
    """Random bank from [(name, out_channels), ...]; input channels chain."""
    rng = np.random.default_rng(seed)
    layers = []
    c_in = 3
    for name, c_out in layer_specs:
        w = rng.normal(0.0, scale, size=(c_out, c_in, 3, 3)).astype(np.float32)
        b = rng.normal(0.0, scale, size=c_out).astype(np.float32)
        layers.append(ConvLayer(name, w, b))
        c_in = c_out
    return WeightBank(layers, np.asarray(means, dtype=np.float32))


def ref_conv2d(x, weights, bias):
    """Direct-summation 3x3 pad-1 cross-correlation (slow, loop-based)."""
    c_out = weights.shape[0]
    c_in, h, w = x.shape
    out = np.zeros((c_out, h, w), dtype=np.float64)
    for o in range(c_out):
        for y in range(h):
            for xx in range(w):
                acc = float(bias[o])
                for c in range(c_in):
                    for ky in range(3):
                        for kx in range(3):
                            yy, xc = y + ky - 1, xx + kx - 1
                            if 0 <= yy < h and 0 <= xc < w:
                                acc += float(weights[o, c, ky, kx]) * float(x[c, yy, xc])
                out[o, y, xx] = acc
    return out


def ref_forward(image, bank, wanted):
    """Loop-based forward pass: preprocess, conv/ReLU, 2x2 max pools."""
    x = image.transpose(2, 0, 1).astype(np.float64) * 255.0
    x = x - bank.channel_means.astype(np.float64)[:, None, None]
    stack = {}
    prev_block = 1
    for layer in bank.layers:
        if block_of(layer.name) > prev_block:
            c, h, w = x.shape
            pooled = np.zeros((c, h // 2, w // 2), dtype=np.float64)
            for cc in range(c):
                for y in range(h // 2):
                    for xx in range(w // 2):
                        pooled[cc, y, xx] = x[cc, 2 * y:2 * y + 2, 2 * xx:2 * xx + 2].max()
            x = pooled
        prev_block = block_of(layer.name)
        x = np.maximum(ref_conv2d(x, layer.weights, layer.bias), 0.0)
        if layer.name in wanted:
            stack[layer.name] = x.copy()
    return stack


def rel_err(a, b, floor=1e-8):
    """Elementwise relative error with an absolute floor."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def central_diff(f, x, h=1e-5, coords=None):
    """Central finite differences of scalar f at x over selected flat coords."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.ravel()
    if coords is None:
        coords = range(flat.size)
    grad = {}
    for i in coords:
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2.0 * h)
    return grad
