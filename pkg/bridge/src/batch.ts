/**
 * Streaming (degraded, clear) training pairs produced by the CLI.
 *
 * Each batch is one `augment` invocation into a scratch directory with a
 * seed derived from the request seed and the batch index, so any yielded
 * pair can be reproduced by re-running the CLI with the logged manifest.
 */

import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { runCli } from './cli';
import { FloatImage, decodePng, toFloat } from './png';

export interface BatchRequest {
  /** Directory of clear PNG images fed to the CLI. */
  clearDir: string;
  /** Optional JSON config file passed through to the CLI. */
  configPath?: string;
  seed: number;
  batchSize: number;
  /**
   * Optional aligned square crop applied to both sides after decoding.
   * Without it, pairs are the CLI's files decoded verbatim.
   */
  cropSize?: number;
  /** Override the CLI command (whitespace-separated). */
  cli?: string;
  /** Keep the per-batch scratch directories instead of deleting them. */
  keepArtifacts?: boolean;
}

export interface Pair {
  batch: number;
  index: number;
  degraded: FloatImage;
  clear: FloatImage;
  /** Clear source file the CLI degraded for this pair. */
  sourceImage: string;
  /** Parsed replay sidecar written by the CLI. */
  record: Record<string, unknown>;
}

export interface BatchLog {
  batch: number;
  seed: number;
  manifest: Record<string, unknown>;
  outDir?: string;
}

export function batchSeed(baseSeed: number, batch: number): number {
  return baseSeed + batch;
}

function loadFloatPng(file: string): FloatImage {
  return toFloat(decodePng(fs.readFileSync(file)));
}

/** Deterministic 32-bit mix for crop offsets (independent of the CLI). */
function mix32(x: number): number {
  let z = (x + 0x9e3779b9) >>> 0;
  z = Math.imul(z ^ (z >>> 16), 0x21f0aaad) >>> 0;
  z = Math.imul(z ^ (z >>> 15), 0x735a2d97) >>> 0;
  return (z ^ (z >>> 15)) >>> 0;
}

function alignedCrop(img: FloatImage, size: number, key: number): FloatImage {
  const ch = Math.min(size, img.height);
  const cw = Math.min(size, img.width);
  const y = img.height === ch ? 0 : mix32(key) % (img.height - ch + 1);
  const x = img.width === cw ? 0 : mix32(key ^ 0x5bd1e995) % (img.width - cw + 1);
  const data = new Float64Array(ch * cw * img.channels);
  for (let row = 0; row < ch; row++) {
    const src = ((y + row) * img.width + x) * img.channels;
    data.set(img.data.subarray(src, src + cw * img.channels), row * cw * img.channels);
  }
  return { width: cw, height: ch, channels: img.channels, data };
}

/**
 * Stream aligned (degraded, clear) pairs, `batches * batchSize` in total.
 * `log`, when given, collects one entry per CLI invocation with the parsed
 * manifest, so every yielded value is reproducible by replaying the CLI.
 */
export async function* batchIterator(
  req: BatchRequest,
  batches = 1,
  log?: BatchLog[],
): AsyncGenerator<Pair> {
  const cli = req.cli ? req.cli.trim().split(/\s+/) : undefined;
  for (let b = 0; b < batches; b++) {
    const seed = batchSeed(req.seed, b);
    const outDir = fs.mkdtempSync(path.join(os.tmpdir(), 'nightforge-batch-'));
    try {
      const args = [
        'augment',
        '--in', req.clearDir,
        '--out', outDir,
        '--seed', String(seed),
        '--count', String(req.batchSize),
      ];
      if (req.configPath) args.push('--config', req.configPath);
      runCli(args, cli);
      const manifest = JSON.parse(
        fs.readFileSync(path.join(outDir, 'manifest.json'), 'utf8'),
      );
      log?.push({
        batch: b,
        seed,
        manifest,
        outDir: req.keepArtifacts ? outDir : undefined,
      });
      for (let i = 0; i < req.batchSize; i++) {
        const stem = `aug_${String(i).padStart(5, '0')}`;
        const record = JSON.parse(
          fs.readFileSync(path.join(outDir, `${stem}.json`), 'utf8'),
        ) as Record<string, unknown>;
        const sourceImage = String(record.source_image);
        let degraded = loadFloatPng(path.join(outDir, `${stem}.png`));
        let clear = loadFloatPng(path.join(req.clearDir, sourceImage));
        if (req.cropSize) {
          const key = (seed ^ Math.imul(i + 1, 0x9e3779b1)) >>> 0;
          degraded = alignedCrop(degraded, req.cropSize, key);
          clear = alignedCrop(clear, req.cropSize, key);
        }
        yield { batch: b, index: i, degraded, clear, sourceImage, record };
      }
    } finally {
      if (!req.keepArtifacts) {
        fs.rmSync(outDir, { recursive: true, force: true });
      }
    }
  }
}

/** Collect a whole run into memory (convenience for small batches). */
export async function collectBatches(
  req: BatchRequest,
  batches = 1,
  log?: BatchLog[],
): Promise<Pair[]> {
  const out: Pair[] = [];
  for await (const pair of batchIterator(req, batches, log)) {
    out.push(pair);
  }
  return out;
}
