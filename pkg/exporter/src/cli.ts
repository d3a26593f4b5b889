#!/usr/bin/env node
/**
 * CLI: motionadapt-export export --videos <listing.json> --frames 8
 *        --clips 4 --crops 3 --out <dir> [--dim 512] [--crop-size 224]
 *        [--backbone seeded-projection-v1]
 *
 * The listing file is a JSON array of {path, label, id} entries with video
 * paths relative to the listing file itself.
 */

import { dirname, resolve } from 'path';

import { ExportJob, loadVideoListing, runExport } from './export';

interface Flags {
  [key: string]: string;
}

function parseFlags(argv: string[]): Flags {
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near ${key}`);
    }
    flags[key.slice(2)] = argv[i + 1];
  }
  return flags;
}

function intFlag(flags: Flags, name: string, fallback: number): number {
  if (!(name in flags)) return fallback;
  const value = Number(flags[name]);
  if (!Number.isInteger(value) || value < 1) {
    throw new Error(`--${name} must be a positive integer, got ${flags[name]}`);
  }
  return value;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== 'export') {
    console.error('usage: motionadapt-export export --videos <listing.json> ' +
                  '--frames 8 --clips 4 --crops 3 --out <dir>');
    return 2;
  }
  try {
    const flags = parseFlags(rest);
    for (const required of ['videos', 'out']) {
      if (!(required in flags)) throw new Error(`missing --${required}`);
    }
    const listingPath = resolve(flags.videos);
    const job: ExportJob = {
      videos: loadVideoListing(listingPath),
      baseDir: dirname(listingPath),
      framesPerClip: intFlag(flags, 'frames', 8),
      clipsPerVideo: intFlag(flags, 'clips', 4),
      cropsPerClip: intFlag(flags, 'crops', 3),
      outputDir: resolve(flags.out),
      backboneId: flags.backbone ?? 'seeded-projection-v1',
      outputDim: intFlag(flags, 'dim', 512),
      cropSize: intFlag(flags, 'crop-size', 224),
    };
    const result = runExport(job);
    console.log(
      `exported ${result.records} records (${result.classes.length} classes) ` +
      `to ${result.featurePath}` +
      (result.skipped.length ? `; skipped: ${result.skipped.join(', ')}` : ''));
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
