/**
 * Canonical VGG-19 prefix through conv5_1: names, channel counts, and the
 * torchvision `features.<idx>` module indices for each conv layer.
 */

export interface LayerSpec {
  name: string;
  featuresIndex: number;
  inChannels: number;
  outChannels: number;
}

export const VGG19_PREFIX: LayerSpec[] = [
  { name: "conv1_1", featuresIndex: 0, inChannels: 3, outChannels: 64 },
  { name: "conv1_2", featuresIndex: 2, inChannels: 64, outChannels: 64 },
  { name: "conv2_1", featuresIndex: 5, inChannels: 64, outChannels: 128 },
  { name: "conv2_2", featuresIndex: 7, inChannels: 128, outChannels: 128 },
  { name: "conv3_1", featuresIndex: 10, inChannels: 128, outChannels: 256 },
  { name: "conv3_2", featuresIndex: 12, inChannels: 256, outChannels: 256 },
  { name: "conv3_3", featuresIndex: 14, inChannels: 256, outChannels: 256 },
  { name: "conv3_4", featuresIndex: 16, inChannels: 256, outChannels: 256 },
  { name: "conv4_1", featuresIndex: 19, inChannels: 256, outChannels: 512 },
  { name: "conv4_2", featuresIndex: 21, inChannels: 512, outChannels: 512 },
  { name: "conv4_3", featuresIndex: 23, inChannels: 512, outChannels: 512 },
  { name: "conv4_4", featuresIndex: 25, inChannels: 512, outChannels: 512 },
  { name: "conv5_1", featuresIndex: 28, inChannels: 512, outChannels: 512 },
];

/** Pooling sits before each layer that starts a new block. */
export function poolBefore(index: number): boolean {
  if (index === 0) return false;
  return blockOf(VGG19_PREFIX[index].name) > blockOf(VGG19_PREFIX[index - 1].name);
}

export function blockOf(name: string): number {
  const m = /^conv(\d+)_(\d+)$/.exec(name);
  if (!m) throw new Error(`bad layer name ${name}`);
  return parseInt(m[1], 10);
}

/**
 * Channel means for the NPHW header, in RGB order on the 0-255 scale
 * (the canonical ImageNet means VGG training used).
 */
export const DEFAULT_MEANS: [number, number, number] = [123.68, 116.779, 103.939];

/** torchvision's documented [0,1] normalization constants. */
export const TORCHVISION_MEAN: [number, number, number] = [0.485, 0.456, 0.406];
export const TORCHVISION_STD: [number, number, number] = [0.229, 0.224, 0.225];
