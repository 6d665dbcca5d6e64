/**
 * Checkpoint -> NPHW conversion.
 *
 * Reads a safetensors VGG-19 checkpoint (torchvision `features.N.weight`
 * naming, or direct `conv{b}_{i}.weight` naming), validates every layer
 * against the canonical architecture, and writes the 13-layer prefix
 * through conv5_1.  Weights are bit-preserved; optionally torchvision's
 * [0,1] mean/std normalization is folded into the first layer so images
 * only need the 0-255 mean subtraction the NPHW header describes.
 */

import { createHash } from "crypto";

import { Checkpoint } from "./safetensors";
import { Bank, BankLayer } from "./nphw";
import {
  DEFAULT_MEANS,
  LayerSpec,
  TORCHVISION_MEAN,
  TORCHVISION_STD,
  VGG19_PREFIX,
} from "./vgg";

export interface ExportOptions {
  means?: [number, number, number];
  foldTorchvision?: boolean;
  source?: string;
}

export interface ManifestLayer {
  name: string;
  outChannels: number;
  inChannels: number;
  kernel: [number, number];
  sha256: string;
}

export interface ExportManifest {
  source: string;
  channelMeans: [number, number, number];
  foldedTorchvisionNormalization: boolean;
  layers: ManifestLayer[];
}

function findTensor(ckpt: Checkpoint, spec: LayerSpec, kind: "weight" | "bias") {
  const candidates = [
    `features.${spec.featuresIndex}.${kind}`,
    `${spec.name}.${kind}`,
  ];
  for (const key of candidates) {
    const t = ckpt.tensors.get(key);
    if (t) return t;
  }
  throw new Error(
    `missing layer ${spec.name}: checkpoint has neither ${candidates[0]}`
    + ` nor ${candidates[1]}`);
}

function toFloat32(xs: number[] | Float32Array): Float32Array {
  return xs instanceof Float32Array ? xs : Float32Array.from(xs);
}

export function bankFromCheckpoint(ckpt: Checkpoint, opts: ExportOptions = {}): Bank {
  const fold = opts.foldTorchvision ?? false;
  const means = toFloat32(
    opts.means ?? (fold
      ? TORCHVISION_MEAN.map((m) => m * 255.0)
      : DEFAULT_MEANS));
  const layers: BankLayer[] = [];
  for (const spec of VGG19_PREFIX) {
    const weight = findTensor(ckpt, spec, "weight");
    const bias = findTensor(ckpt, spec, "bias");
    const expect = [spec.outChannels, spec.inChannels, 3, 3];
    if (weight.shape.length !== 4 || expect.some((d, i) => weight.shape[i] !== d)) {
      throw new Error(
        `layer ${spec.name}: weight shape [${weight.shape}] does not match`
        + ` canonical VGG-19 [${expect}]`);
    }
    if (bias.shape.length !== 1 || bias.shape[0] !== spec.outChannels) {
      throw new Error(
        `layer ${spec.name}: bias shape [${bias.shape}] does not match`
        + ` out_channels ${spec.outChannels}`);
    }
    let weights = weight.data.slice();
    if (fold && spec.name === "conv1_1") {
      // torchvision expects (img - mean) / std on [0,1] inputs; dividing
      // the first layer's per-input-channel weights by 255 * std makes
      // the bank consume 0-255 mean-subtracted images instead
      for (let o = 0; o < spec.outChannels; o++) {
        for (let c = 0; c < spec.inChannels; c++) {
          const base = (o * spec.inChannels + c) * 9;
          const scale = 1.0 / (255.0 * TORCHVISION_STD[c]);
          for (let k = 0; k < 9; k++) weights[base + k] *= scale;
        }
      }
    }
    layers.push({
      name: spec.name,
      outChannels: spec.outChannels,
      inChannels: spec.inChannels,
      kernelH: 3,
      kernelW: 3,
      weights,
      bias: bias.data.slice(),
    });
  }
  return {
    channelMeans: [means[0], means[1], means[2]],
    layers,
  };
}

export function manifestFor(bank: Bank, opts: ExportOptions = {}): ExportManifest {
  return {
    source: opts.source ?? "unknown",
    channelMeans: bank.channelMeans,
    foldedTorchvisionNormalization: opts.foldTorchvision ?? false,
    layers: bank.layers.map((layer) => {
      const hash = createHash("sha256");
      const w = Buffer.alloc(layer.weights.length * 4);
      for (let i = 0; i < layer.weights.length; i++) {
        w.writeFloatLE(layer.weights[i], i * 4);
      }
      const b = Buffer.alloc(layer.bias.length * 4);
      for (let i = 0; i < layer.bias.length; i++) b.writeFloatLE(layer.bias[i], i * 4);
      hash.update(w);
      hash.update(b);
      return {
        name: layer.name,
        outChannels: layer.outChannels,
        inChannels: layer.inChannels,
        kernel: [layer.kernelH, layer.kernelW] as [number, number],
        sha256: hash.digest("hex"),
      };
    }),
  };
}
