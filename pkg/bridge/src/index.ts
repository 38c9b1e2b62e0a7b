export { CliError, resolveCli, runCli } from './cli';
export {
  BatchLog,
  BatchRequest,
  Pair,
  batchIterator,
  batchSeed,
  collectBatches,
} from './batch';
export { GateOptions, GateResult, gateScores } from './gate';
export {
  FloatImage,
  RawImage,
  decodePng,
  encodePng,
  rmsContrast,
  toFloat,
} from './png';
