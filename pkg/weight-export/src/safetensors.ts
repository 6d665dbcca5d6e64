/**
 * Minimal safetensors reader: 8-byte little-endian header length, JSON
 * header mapping tensor names to {dtype, shape, data_offsets}, raw data.
 * Only F32 tensors are supported (all VGG-19 conv parameters are F32).
 */

export interface TensorRecord {
  dtype: string;
  shape: number[];
  data_offsets: [number, number];
}

export interface Checkpoint {
  tensors: Map<string, { shape: number[]; data: Float32Array }>;
}

export function parseSafetensors(buf: Buffer): Checkpoint {
  if (buf.length < 8) {
    throw new Error("safetensors file too short for a header");
  }
  const headerLen = Number(buf.readBigUInt64LE(0));
  if (8 + headerLen > buf.length) {
    throw new Error(`safetensors header (${headerLen} bytes) exceeds the file`);
  }
  let header: Record<string, TensorRecord>;
  try {
    header = JSON.parse(buf.subarray(8, 8 + headerLen).toString("utf-8"));
  } catch (err) {
    throw new Error(`safetensors header is not valid JSON: ${err}`);
  }
  const dataStart = 8 + headerLen;
  const tensors = new Map<string, { shape: number[]; data: Float32Array }>();
  for (const [name, rec] of Object.entries(header)) {
    if (name === "__metadata__") continue;
    if (rec.dtype !== "F32") {
      throw new Error(`tensor ${name}: unsupported dtype ${rec.dtype}, need F32`);
    }
    const [start, end] = rec.data_offsets;
    const count = rec.shape.reduce((a, b) => a * b, 1);
    if (end - start !== count * 4) {
      throw new Error(`tensor ${name}: data span ${end - start} bytes does not`
        + ` match shape [${rec.shape}]`);
    }
    if (dataStart + end > buf.length) {
      throw new Error(`tensor ${name}: data extends past end of file`);
    }
    // copy so the view is aligned and independent of the file buffer
    const bytes = buf.subarray(dataStart + start, dataStart + end);
    const data = new Float32Array(count);
    for (let i = 0; i < count; i++) data[i] = bytes.readFloatLE(i * 4);
    tensors.set(name, { shape: rec.shape, data });
  }
  return { tensors };
}

/** Serialize tensors into a safetensors buffer (used by tests/tools). */
export function writeSafetensors(
  tensors: Map<string, { shape: number[]; data: Float32Array }>,
): Buffer {
  const header: Record<string, TensorRecord> = {};
  let offset = 0;
  const chunks: Buffer[] = [];
  for (const [name, t] of tensors) {
    const bytes = Buffer.alloc(t.data.length * 4);
    for (let i = 0; i < t.data.length; i++) bytes.writeFloatLE(t.data[i], i * 4);
    header[name] = {
      dtype: "F32",
      shape: t.shape,
      data_offsets: [offset, offset + bytes.length],
    };
    offset += bytes.length;
    chunks.push(bytes);
  }
  const headerJson = Buffer.from(JSON.stringify(header), "utf-8");
  const lenBuf = Buffer.alloc(8);
  lenBuf.writeBigUInt64LE(BigInt(headerJson.length));
  return Buffer.concat([lenBuf, headerJson, ...chunks]);
}
