/**
 * Quality gating for external trainers: score two checkpoints on a probe
 * directory through `infer` + `score` and accept only if the newer one
 * improves the mean no-reference score.
 */

import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { runCli } from './cli';

export interface GateOptions {
  /** 'contrast' or an external command template with {path}. */
  metric?: string;
  /** Acceptance threshold on (new - old); default 0. */
  threshold?: number;
  cli?: string;
  keepArtifacts?: boolean;
}

export interface GateResult {
  score: number;
  accept: boolean;
  meanOld: number;
  meanNew: number;
  outDirs?: { old: string; new: string };
}

function parseMean(csv: string): number {
  const lines = csv.trim().split(/\r?\n/);
  const last = lines[lines.length - 1];
  if (!last.startsWith('mean,')) {
    throw new Error(`score output has no mean line: ${last}`);
  }
  const value = Number(last.slice('mean,'.length));
  if (!Number.isFinite(value)) {
    throw new Error(`unparseable mean score: ${last}`);
  }
  return value;
}

function inferAndScore(
  checkpoint: string,
  probeDir: string,
  metric: string,
  cli?: string[],
): { mean: number; outDir: string } {
  const outDir = fs.mkdtempSync(path.join(os.tmpdir(), 'nightforge-gate-'));
  runCli(['infer', '--checkpoint', checkpoint, '--in', probeDir, '--out', outDir], cli);
  const scored = runCli(['score', '--in', outDir, '--metric', metric], cli);
  return { mean: parseMean(scored.stdout), outDir };
}

/**
 * Difference-semantics gate over two checkpoints, matching the in-process
 * refinement gate: score = mean(metric(new outputs)) - mean(metric(old
 * outputs)), accept iff score > threshold.
 */
export function gateScores(
  checkpointOld: string,
  checkpointNew: string,
  probeDir: string,
  options: GateOptions = {},
): GateResult {
  const metric = options.metric ?? 'contrast';
  const threshold = options.threshold ?? 0;
  const cli = options.cli ? options.cli.trim().split(/\s+/) : undefined;
  const oldRun = inferAndScore(checkpointOld, probeDir, metric, cli);
  const newRun = inferAndScore(checkpointNew, probeDir, metric, cli);
  const score = newRun.mean - oldRun.mean;
  const result: GateResult = {
    score,
    accept: score > threshold,
    meanOld: oldRun.mean,
    meanNew: newRun.mean,
  };
  if (options.keepArtifacts) {
    result.outDirs = { old: oldRun.outDir, new: newRun.outDir };
  } else {
    fs.rmSync(oldRun.outDir, { recursive: true, force: true });
    fs.rmSync(newRun.outDir, { recursive: true, force: true });
  }
  return result;
}
