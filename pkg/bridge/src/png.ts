/**
 * Minimal PNG codec for the formats the CLI produces: 8-bit grayscale,
 * RGB, and RGBA (alpha dropped on decode), non-interlaced. Enough to move
 * pixels between the CLI's files and typed arrays without native deps.
 */

import * as zlib from 'node:zlib';

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export interface RawImage {
  width: number;
  height: number;
  channels: 1 | 3;
  /** Row-major 8-bit samples, length = width * height * channels. */
  data: Uint8Array;
}

export interface FloatImage {
  width: number;
  height: number;
  channels: 1 | 3;
  /** Row-major intensities in [0, 1] (byte / 255). */
  data: Float64Array;
}

export function decodePng(buf: Buffer): RawImage {
  if (!buf.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error('not a PNG file');
  }
  let offset = 8;
  let width = 0;
  let height = 0;
  let colorType = -1;
  const idat: Buffer[] = [];
  while (offset < buf.length) {
    const length = buf.readUInt32BE(offset);
    const type = buf.toString('ascii', offset + 4, offset + 8);
    const body = buf.subarray(offset + 8, offset + 8 + length);
    if (type === 'IHDR') {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      const bitDepth = body[8];
      colorType = body[9];
      const interlace = body[12];
      if (bitDepth !== 8) throw new Error(`unsupported bit depth ${bitDepth}`);
      if (![0, 2, 6].includes(colorType)) {
        throw new Error(`unsupported color type ${colorType}`);
      }
      if (interlace !== 0) throw new Error('interlaced PNG not supported');
    } else if (type === 'IDAT') {
      idat.push(Buffer.from(body));
    } else if (type === 'IEND') {
      break;
    }
    offset += 12 + length;
  }
  if (width === 0 || height === 0 || idat.length === 0) {
    throw new Error('truncated PNG');
  }
  const srcChannels = colorType === 0 ? 1 : colorType === 2 ? 3 : 4;
  const raw = zlib.inflateSync(Buffer.concat(idat));
  const stride = width * srcChannels;
  if (raw.length !== (stride + 1) * height) {
    throw new Error('PNG raster size mismatch');
  }
  const unfiltered = unfilter(raw, height, stride, srcChannels);
  const channels: 1 | 3 = srcChannels === 1 ? 1 : 3;
  const out = new Uint8Array(width * height * channels);
  if (srcChannels === channels) {
    out.set(unfiltered);
  } else {
    // RGBA: drop alpha
    for (let px = 0; px < width * height; px++) {
      out[px * 3] = unfiltered[px * 4];
      out[px * 3 + 1] = unfiltered[px * 4 + 1];
      out[px * 3 + 2] = unfiltered[px * 4 + 2];
    }
  }
  return { width, height, channels, data: out };
}

function unfilter(raw: Buffer, height: number, stride: number, bpp: number): Uint8Array {
  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const cur = y * stride;
    const prev = (y - 1) * stride;
    for (let x = 0; x < stride; x++) {
      const a = x >= bpp ? out[cur + x - bpp] : 0;
      const b = y > 0 ? out[prev + x] : 0;
      const c = y > 0 && x >= bpp ? out[prev + x - bpp] : 0;
      let value: number;
      switch (filter) {
        case 0:
          value = row[x];
          break;
        case 1:
          value = row[x] + a;
          break;
        case 2:
          value = row[x] + b;
          break;
        case 3:
          value = row[x] + Math.floor((a + b) / 2);
          break;
        case 4:
          value = row[x] + paeth(a, b, c);
          break;
        default:
          throw new Error(`unknown PNG filter ${filter}`);
      }
      out[cur + x] = value & 0xff;
    }
  }
  return out;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function encodePng(img: RawImage): Buffer {
  const { width, height, channels, data } = img;
  if (data.length !== width * height * channels) {
    throw new Error('raster length does not match dimensions');
  }
  const stride = width * channels;
  const raw = Buffer.alloc((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: None
    raw.set(data.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = channels === 1 ? 0 : 2;
  ihdr[10] = 0;
  ihdr[11] = 0;
  ihdr[12] = 0;
  return Buffer.concat([
    SIGNATURE,
    chunk('IHDR', ihdr),
    chunk('IDAT', zlib.deflateSync(raw)),
    chunk('IEND', Buffer.alloc(0)),
  ]);
}

function chunk(type: string, body: Buffer): Buffer {
  const out = Buffer.alloc(12 + body.length);
  out.writeUInt32BE(body.length, 0);
  out.write(type, 4, 'ascii');
  body.copy(out, 8);
  out.writeUInt32BE(crc32(out.subarray(4, 8 + body.length)), 8 + body.length);
  return out;
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let crc = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    crc = CRC_TABLE[(crc ^ buf[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

/** Decode 8-bit samples to intensities by dividing by 255. */
export function toFloat(img: RawImage): FloatImage {
  const data = new Float64Array(img.data.length);
  for (let i = 0; i < img.data.length; i++) {
    data[i] = img.data[i] / 255;
  }
  return { width: img.width, height: img.height, channels: img.channels, data };
}

/** Population std of BT.601 luminance on the 0..255 scale. */
export function rmsContrast(img: FloatImage): number {
  const n = img.width * img.height;
  const luma = new Float64Array(n);
  if (img.channels === 1) {
    luma.set(img.data);
  } else {
    for (let px = 0; px < n; px++) {
      luma[px] =
        0.299 * img.data[px * 3] +
        0.587 * img.data[px * 3 + 1] +
        0.114 * img.data[px * 3 + 2];
    }
  }
  let mean = 0;
  for (let i = 0; i < n; i++) mean += luma[i];
  mean /= n;
  let varSum = 0;
  for (let i = 0; i < n; i++) {
    const d = luma[i] - mean;
    varSum += d * d;
  }
  return Math.sqrt(varSum / n) * 255;
}
