#!/usr/bin/env node
/** `semfeat-export export --root <dir> --grid 3 --k-tags 10 --out corpus.jsonl` */

import { runExport } from './export.js';

const USAGE =
  'usage: semfeat-export export --root <dir> --grid {3|4|5} [--k-tags 10] ' +
  '[--model histogram-v1] --out <corpus.jsonl>';

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith('--')) throw new Error(`unexpected argument ${arg}`);
    const value = argv[i + 1];
    if (value === undefined || value.startsWith('--')) {
      throw new Error(`flag ${arg} needs a value`);
    }
    out[arg.slice(2)] = value;
    i++;
  }
  return out;
}

export function main(argv: string[]): number {
  if (argv[0] !== 'export') {
    console.error(USAGE);
    return 2;
  }
  try {
    const flags = parseArgs(argv.slice(1));
    for (const required of ['root', 'grid', 'out']) {
      if (!(required in flags)) throw new Error(`missing --${required}`);
    }
    const summary = runExport({
      root: flags.root,
      grid: Number(flags.grid) as 3 | 4 | 5,
      kTags: flags['k-tags'] !== undefined ? Number(flags['k-tags']) : 10,
      out: flags.out,
      model: flags.model ?? 'histogram-v1',
    });
    console.log(
      `wrote ${summary.images} images (${summary.categories.length} categories) to ${flags.out}` +
        (summary.skipped.length ? `; skipped ${summary.skipped.length}` : ''),
    );
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
