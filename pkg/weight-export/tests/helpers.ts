import { VGG19_PREFIX } from "../src/vgg";

/** Deterministic 32-bit PRNG (mulberry32). */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function gaussianPair(rand: () => number): [number, number] {
  const u = Math.max(rand(), 1e-12);
  const v = rand();
  const r = Math.sqrt(-2 * Math.log(u));
  return [r * Math.cos(2 * Math.PI * v), r * Math.sin(2 * Math.PI * v)];
}

export type TensorMap = Map<string, { shape: number[]; data: Float32Array }>;

/**
 * Random checkpoint with the exact VGG-19 architecture.  He-style
 * weight scale keeps activation magnitudes realistic through the stack.
 */
export function syntheticVgg19(
  seed: number,
  naming: "torchvision" | "direct" = "torchvision",
): TensorMap {
  const rand = rng(seed);
  const tensors: TensorMap = new Map();
  for (const spec of VGG19_PREFIX) {
    const n = spec.outChannels * spec.inChannels * 9;
    const scale = Math.sqrt(2.0 / (9 * spec.inChannels));
    const w = new Float32Array(n);
    for (let i = 0; i < n; i += 2) {
      const [a, b] = gaussianPair(rand);
      w[i] = a * scale;
      if (i + 1 < n) w[i + 1] = b * scale;
    }
    const bias = new Float32Array(spec.outChannels);
    for (let i = 0; i < spec.outChannels; i++) bias[i] = (rand() - 0.5) * 0.2;
    const prefix = naming === "torchvision"
      ? `features.${spec.featuresIndex}`
      : spec.name;
    tensors.set(`${prefix}.weight`, {
      shape: [spec.outChannels, spec.inChannels, 3, 3],
      data: w,
    });
    tensors.set(`${prefix}.bias`, { shape: [spec.outChannels], data: bias });
  }
  return tensors;
}
