/**
 * NPHF activation-fixture file: magic "NPHF", u32 version=1, u32 record
 * count; per record: u16 name length + UTF-8 name, u32 ndim, u32 dims,
 * f32 data (row-major).  Little-endian throughout.
 */

import { Activation } from "./forward";

export const FIXTURE_MAGIC = "NPHF";
export const FIXTURE_VERSION = 1;

export function writeFixture(records: Map<string, Activation>): Buffer {
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(12);
  head.write(FIXTURE_MAGIC, 0, "ascii");
  head.writeUInt32LE(FIXTURE_VERSION, 4);
  head.writeUInt32LE(records.size, 8);
  chunks.push(head);
  for (const [name, act] of records) {
    const nameBuf = Buffer.from(name, "utf-8");
    const meta = Buffer.alloc(2 + nameBuf.length + 4 + 12);
    meta.writeUInt16LE(nameBuf.length, 0);
    nameBuf.copy(meta, 2);
    meta.writeUInt32LE(3, 2 + nameBuf.length);
    meta.writeUInt32LE(act.channels, 6 + nameBuf.length);
    meta.writeUInt32LE(act.height, 10 + nameBuf.length);
    meta.writeUInt32LE(act.width, 14 + nameBuf.length);
    chunks.push(meta);
    const data = Buffer.alloc(act.data.length * 4);
    for (let i = 0; i < act.data.length; i++) data.writeFloatLE(act.data[i], i * 4);
    chunks.push(data);
  }
  return Buffer.concat(chunks);
}

export function readFixture(buf: Buffer): Map<string, Activation> {
  if (buf.subarray(0, 4).toString("ascii") !== FIXTURE_MAGIC) {
    throw new Error("bad fixture magic");
  }
  if (buf.readUInt32LE(4) !== FIXTURE_VERSION) {
    throw new Error("unsupported fixture version");
  }
  const count = buf.readUInt32LE(8);
  let off = 12;
  const out = new Map<string, Activation>();
  for (let r = 0; r < count; r++) {
    const nameLen = buf.readUInt16LE(off);
    off += 2;
    const name = buf.subarray(off, off + nameLen).toString("utf-8");
    off += nameLen;
    const ndim = buf.readUInt32LE(off);
    off += 4;
    if (ndim !== 3) throw new Error(`record ${name}: expected 3 dims, got ${ndim}`);
    const channels = buf.readUInt32LE(off);
    const height = buf.readUInt32LE(off + 4);
    const width = buf.readUInt32LE(off + 8);
    off += 12;
    const n = channels * height * width;
    const data = new Float32Array(n);
    for (let i = 0; i < n; i++) data[i] = buf.readFloatLE(off + i * 4);
    off += n * 4;
    out.set(name, { channels, height, width, data });
  }
  return out;
}
