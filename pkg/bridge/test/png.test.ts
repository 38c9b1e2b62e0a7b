import * as assert from 'node:assert';
import * as fs from 'node:fs';
import * as path from 'node:path';
import { test } from 'node:test';

import { decodePng, encodePng, rmsContrast, toFloat } from '../src/png';
import { python, randomImage, tempDir } from './util';

test('encode/decode roundtrip preserves bytes (RGB and grayscale)', () => {
  for (const channels of [1, 3] as const) {
    const img = randomImage(7 + channels, 13, 9, channels);
    const back = decodePng(encodePng(img));
    assert.strictEqual(back.width, 13);
    assert.strictEqual(back.height, 9);
    assert.strictEqual(back.channels, channels);
    assert.deepStrictEqual(back.data, img.data);
  }
});

test('rejects non-PNG input', () => {
  assert.throws(() => decodePng(Buffer.from('P6 1 1 255 xyz')));
});

test('decodes PNG files written by the primary toolchain bit-exactly', () => {
  const dir = tempDir('bridge-pil-');
  const pngPath = path.join(dir, 'ref.png');
  const rawPath = path.join(dir, 'ref.bytes');
  python(
    `
import sys
import numpy as np
from nightforge.image import save_image
from nightforge.rng import RngStream

arr = RngStream(12345).random(size=(21, 17, 3))
save_image(arr, sys.argv[1])
quant = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
open(sys.argv[2], "wb").write(quant.tobytes())
`,
    [pngPath, rawPath],
  );
  const decoded = decodePng(fs.readFileSync(pngPath));
  const expected = new Uint8Array(fs.readFileSync(rawPath));
  assert.strictEqual(decoded.width, 17);
  assert.strictEqual(decoded.height, 21);
  assert.strictEqual(decoded.channels, 3);
  assert.deepStrictEqual(decoded.data, expected);
});

test('float conversion divides by 255', () => {
  const img = { width: 2, height: 1, channels: 1 as const, data: new Uint8Array([0, 51]) };
  const float = toFloat(img);
  assert.strictEqual(float.data[0], 0);
  assert.strictEqual(float.data[1], 51 / 255);
});

test('contrast of a constant image is zero and of a checkerboard is large', () => {
  const flat = toFloat({ width: 4, height: 4, channels: 1, data: new Uint8Array(16).fill(100) });
  assert.ok(rmsContrast(flat) < 1e-12);
  const data = new Uint8Array(16);
  for (let i = 0; i < 16; i++) data[i] = i % 2 ? 255 : 0;
  const board = toFloat({ width: 4, height: 4, channels: 1, data });
  assert.ok(Math.abs(rmsContrast(board) - 127.5) < 1e-9);
});
