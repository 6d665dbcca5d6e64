/**
 * Reference forward pass over an NPHW bank: 3x3 zero-padded convolution,
 * ReLU, and 2x2/stride-2 max pooling before each new block.  Float32
 * accumulation, plain loops — slow but dependency-free, and independent
 * of any consumer's implementation, which is the point: activations it
 * emits serve as a cross-implementation fixture.
 */

import { Bank, BankLayer } from "./nphw";
import { blockOf } from "./vgg";

export interface Activation {
  channels: number;
  height: number;
  width: number;
  data: Float32Array; // channel-major (c, y, x)
}

function conv3x3(input: Activation, layer: BankLayer): Activation {
  const { height: h, width: w } = input;
  const cIn = layer.inChannels;
  const cOut = layer.outChannels;
  if (input.channels !== cIn) {
    throw new Error(`layer ${layer.name}: expected ${cIn} input channels,`
      + ` got ${input.channels}`);
  }
  const out = new Float32Array(cOut * h * w);
  const src = input.data;
  const weights = layer.weights;
  for (let o = 0; o < cOut; o++) {
    const oBase = o * h * w;
    out.fill(layer.bias[o], oBase, oBase + h * w);
    for (let c = 0; c < cIn; c++) {
      const cBase = c * h * w;
      const wBase = (o * cIn + c) * 9;
      for (let ky = 0; ky < 3; ky++) {
        for (let kx = 0; kx < 3; kx++) {
          const wv = weights[wBase + ky * 3 + kx];
          if (wv === 0) continue;
          const dy = ky - 1;
          const dx = kx - 1;
          const y0 = Math.max(0, -dy);
          const y1 = Math.min(h, h - dy);
          for (let y = y0; y < y1; y++) {
            const srcRow = cBase + (y + dy) * w;
            const outRow = oBase + y * w;
            const x0 = Math.max(0, -dx);
            const x1 = Math.min(w, w - dx);
            for (let x = x0; x < x1; x++) {
              out[outRow + x] += wv * src[srcRow + x + dx];
            }
          }
        }
      }
    }
  }
  return { channels: cOut, height: h, width: w, data: out };
}

function relu(act: Activation): void {
  const d = act.data;
  for (let i = 0; i < d.length; i++) if (d[i] < 0) d[i] = 0;
}

function maxPool2(act: Activation): Activation {
  const h2 = Math.floor(act.height / 2);
  const w2 = Math.floor(act.width / 2);
  const out = new Float32Array(act.channels * h2 * w2);
  for (let c = 0; c < act.channels; c++) {
    for (let y = 0; y < h2; y++) {
      for (let x = 0; x < w2; x++) {
        const base = c * act.height * act.width + 2 * y * act.width + 2 * x;
        const a = act.data[base];
        const b = act.data[base + 1];
        const d = act.data[base + act.width];
        const e = act.data[base + act.width + 1];
        out[c * h2 * w2 + y * w2 + x] = Math.max(a, b, d, e);
      }
    }
  }
  return { channels: act.channels, height: h2, width: w2, data: out };
}

/**
 * Run the bank on an RGB image in [0,1] (channel-major, HxW per channel)
 * and collect the post-ReLU activations of the requested layers.
 */
export function forward(
  bank: Bank,
  rgb: Float32Array,
  height: number,
  width: number,
  wanted: string[],
): Map<string, Activation> {
  const remaining = new Set(wanted);
  for (const name of wanted) {
    if (!bank.layers.some((l) => l.name === name)) {
      throw new Error(`unknown layer ${name}`);
    }
  }
  let act: Activation = {
    channels: 3,
    height,
    width,
    data: new Float32Array(3 * height * width),
  };
  for (let c = 0; c < 3; c++) {
    for (let i = 0; i < height * width; i++) {
      act.data[c * height * width + i] =
        rgb[c * height * width + i] * 255.0 - bank.channelMeans[c];
    }
  }
  const out = new Map<string, Activation>();
  let prevBlock = 1;
  for (const layer of bank.layers) {
    if (remaining.size === 0) break;
    const block = blockOf(layer.name);
    if (block > prevBlock) act = maxPool2(act);
    prevBlock = block;
    act = conv3x3(act, layer);
    relu(act);
    if (remaining.has(layer.name)) {
      out.set(layer.name, {
        channels: act.channels,
        height: act.height,
        width: act.width,
        data: act.data.slice(),
      });
      remaining.delete(layer.name);
    }
  }
  if (remaining.size > 0) {
    throw new Error(`layers not reached: ${[...remaining].join(", ")}`);
  }
  return out;
}
