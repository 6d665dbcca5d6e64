/**
 * NPHW weight file writer/reader.
 *
 * Little-endian layout: magic "NPHW", u32 version=1, 3 x f32 channel
 * means (RGB, 0-255 scale), u32 layer count; per layer: u16 name length,
 * UTF-8 name, u32 out_channels, u32 in_channels, u32 kernel_h, u32
 * kernel_w, f32 weights in (out, in, kh, kw) row-major order, f32 biases.
 */

export const MAGIC = "NPHW";
export const VERSION = 1;

export interface BankLayer {
  name: string;
  outChannels: number;
  inChannels: number;
  kernelH: number;
  kernelW: number;
  weights: Float32Array; // out*in*kh*kw
  bias: Float32Array;    // out
}

export interface Bank {
  channelMeans: [number, number, number];
  layers: BankLayer[];
}

export function writeNphw(bank: Bank): Buffer {
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(4 + 4 + 12 + 4);
  head.write(MAGIC, 0, "ascii");
  head.writeUInt32LE(VERSION, 4);
  for (let i = 0; i < 3; i++) head.writeFloatLE(bank.channelMeans[i], 8 + 4 * i);
  head.writeUInt32LE(bank.layers.length, 20);
  chunks.push(head);
  for (const layer of bank.layers) {
    const name = Buffer.from(layer.name, "utf-8");
    const meta = Buffer.alloc(2 + name.length + 16);
    meta.writeUInt16LE(name.length, 0);
    name.copy(meta, 2);
    meta.writeUInt32LE(layer.outChannels, 2 + name.length);
    meta.writeUInt32LE(layer.inChannels, 6 + name.length);
    meta.writeUInt32LE(layer.kernelH, 10 + name.length);
    meta.writeUInt32LE(layer.kernelW, 14 + name.length);
    chunks.push(meta);
    const w = Buffer.alloc(layer.weights.length * 4);
    for (let i = 0; i < layer.weights.length; i++) w.writeFloatLE(layer.weights[i], i * 4);
    const b = Buffer.alloc(layer.bias.length * 4);
    for (let i = 0; i < layer.bias.length; i++) b.writeFloatLE(layer.bias[i], i * 4);
    chunks.push(w, b);
  }
  return Buffer.concat(chunks);
}

export function readNphw(buf: Buffer): Bank {
  let off = 0;
  const need = (n: number, what: string) => {
    if (off + n > buf.length) {
      throw new Error(`truncated NPHW file: need ${n} bytes for ${what} at ${off}`);
    }
    const at = off;
    off += n;
    return at;
  };
  const magic = buf.subarray(need(4, "magic"), 4).toString("ascii");
  if (magic !== MAGIC) throw new Error(`bad magic ${JSON.stringify(magic)}`);
  const version = buf.readUInt32LE(need(4, "version"));
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const means: [number, number, number] = [0, 0, 0];
  for (let i = 0; i < 3; i++) means[i] = buf.readFloatLE(need(4, "channel mean"));
  const count = buf.readUInt32LE(need(4, "layer count"));
  const layers: BankLayer[] = [];
  for (let l = 0; l < count; l++) {
    const nameLen = buf.readUInt16LE(need(2, "name length"));
    const name = buf.subarray(need(nameLen, "name"), off).toString("utf-8");
    const outChannels = buf.readUInt32LE(need(4, "out_channels"));
    const inChannels = buf.readUInt32LE(need(4, "in_channels"));
    const kernelH = buf.readUInt32LE(need(4, "kernel_h"));
    const kernelW = buf.readUInt32LE(need(4, "kernel_w"));
    const nW = outChannels * inChannels * kernelH * kernelW;
    const weights = new Float32Array(nW);
    let at = need(nW * 4, `weights of ${name}`);
    for (let i = 0; i < nW; i++) weights[i] = buf.readFloatLE(at + i * 4);
    const bias = new Float32Array(outChannels);
    at = need(outChannels * 4, `bias of ${name}`);
    for (let i = 0; i < outChannels; i++) bias[i] = buf.readFloatLE(at + i * 4);
    layers.push({ name, outChannels, inChannels, kernelH, kernelW, weights, bias });
  }
  if (off !== buf.length) {
    throw new Error(`${buf.length - off} trailing bytes after the last layer`);
  }
  return { channelMeans: means, layers };
}
