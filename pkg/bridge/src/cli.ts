/**
 * Subprocess plumbing for the nightforge CLI. One process at a time per
 * caller; failures carry the captured stderr.
 */

import { spawnSync } from 'node:child_process';

export class CliError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number | null,
    public readonly stderr: string,
  ) {
    super(`${message}\n${stderr.trim()}`);
  }
}

let resolved: string[] | null = null;

/**
 * Command used to invoke the CLI. Override with the NIGHTFORGE_CLI
 * environment variable (whitespace-separated); otherwise the `nightforge`
 * entry point is tried, falling back to `python3 -m nightforge.cli`.
 */
export function resolveCli(): string[] {
  if (resolved) return resolved;
  const env = process.env.NIGHTFORGE_CLI;
  if (env && env.trim()) {
    resolved = env.trim().split(/\s+/);
    return resolved;
  }
  const direct = spawnSync('nightforge', ['--version'], { encoding: 'utf8' });
  resolved =
    direct.status === 0 ? ['nightforge'] : ['python3', '-m', 'nightforge.cli'];
  return resolved;
}

export interface CliRun {
  stdout: string;
  stderr: string;
}

export function runCli(args: string[], cli?: string[]): CliRun {
  const command = cli ?? resolveCli();
  const proc = spawnSync(command[0], [...command.slice(1), ...args], {
    encoding: 'utf8',
    maxBuffer: 64 * 1024 * 1024,
  });
  if (proc.error) {
    throw new CliError(`failed to launch ${command.join(' ')}`, null, String(proc.error));
  }
  if (proc.status !== 0) {
    throw new CliError(
      `nightforge ${args[0]} exited with ${proc.status}`,
      proc.status,
      proc.stderr ?? '',
    );
  }
  return { stdout: proc.stdout ?? '', stderr: proc.stderr ?? '' };
}
