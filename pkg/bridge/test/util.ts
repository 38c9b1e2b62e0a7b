/** Shared helpers for bridge tests: fixture images and python fixtures. */

import * as assert from 'node:assert';
import { spawnSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { RawImage, encodePng } from '../src/png';

/** mulberry32: small deterministic PRNG for test fixtures. */
export function prng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomImage(seed: number, width: number, height: number, channels: 1 | 3): RawImage {
  const rand = prng(seed);
  const data = new Uint8Array(width * height * channels);
  for (let i = 0; i < data.length; i++) {
    data[i] = Math.floor(rand() * 256);
  }
  return { width, height, channels, data };
}

export function tempDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

export function writeClearDir(seed: number, count: number, size = 24): string {
  const dir = tempDir('bridge-clear-');
  for (let i = 0; i < count; i++) {
    fs.writeFileSync(
      path.join(dir, `clear_${i}.png`),
      encodePng(randomImage(seed + i, size, size, 3)),
    );
  }
  return dir;
}

/** Run a python snippet against the installed primary package. */
export function python(script: string, args: string[] = []): string {
  const proc = spawnSync('python3', ['-c', script, ...args], {
    encoding: 'utf8',
    maxBuffer: 16 * 1024 * 1024,
  });
  assert.strictEqual(proc.status, 0, `python failed:\n${proc.stderr}`);
  return proc.stdout;
}
