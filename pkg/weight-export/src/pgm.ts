/** Binary PGM (P5, 8-bit) reader for the bundled test image. */

export interface GrayImage {
  height: number;
  width: number;
  data: Float32Array; // [0, 1]
}

export function readPgm(buf: Buffer): GrayImage {
  // header: "P5" <ws> width <ws> height <ws> maxval <single ws> data
  let pos = 0;
  const token = (): string => {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (pos < buf.length && buf[pos] === 0x23) { // '#' comment
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      return token();
    }
    const start = pos;
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
    return buf.subarray(start, pos).toString("ascii");
  };
  if (token() !== "P5") throw new Error("not a binary PGM (P5) file");
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0)) throw new Error("bad PGM dimensions");
  if (maxval !== 255) throw new Error(`only 8-bit PGM supported, maxval=${maxval}`);
  pos++; // the single whitespace after maxval
  if (pos + width * height > buf.length) throw new Error("truncated PGM data");
  const data = new Float32Array(width * height);
  for (let i = 0; i < width * height; i++) data[i] = buf[pos + i] / 255.0;
  return { height, width, data };
}

/** Replicate a gray image into channel-major RGB planes. */
export function grayToRgb(img: GrayImage): Float32Array {
  const n = img.height * img.width;
  const rgb = new Float32Array(3 * n);
  for (let c = 0; c < 3; c++) rgb.set(img.data, c * n);
  return rgb;
}
