/**
 * Walk a directory-per-category image tree, slice each image into an
 * n x n grid, run the tag model per sub-image, and write pipeline-ready
 * JSONL.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { decodeImage, resize, sliceGrid } from './image.js';
import { loadModel, topTags } from './model.js';
import { ImageRecord, validateRecord } from './schema.js';

export const RESCALE_SIZE = 300; // divides evenly into 3/4/5 grids

export interface ExportJob {
  root: string;
  grid: 3 | 4 | 5;
  kTags: number;
  out: string;
  model: string;
}

export interface ExportSummary {
  images: number;
  skipped: { file: string; reason: string }[];
  categories: string[];
}

export function runExport(job: ExportJob, warn: (msg: string) => void = console.warn): ExportSummary {
  if (![3, 4, 5].includes(job.grid)) {
    throw new Error(`grid must be 3, 4, or 5, got ${job.grid}`);
  }
  if (job.kTags < 1) throw new Error('k-tags must be >= 1');
  if (!fs.existsSync(job.root) || !fs.statSync(job.root).isDirectory()) {
    throw new Error(`dataset root ${job.root} is not a directory`);
  }
  const model = loadModel(job.model); // missing weights are fatal
  if (job.kTags > model.vocabulary.length) {
    throw new Error(`k-tags ${job.kTags} exceeds vocabulary size ${model.vocabulary.length}`);
  }

  const categories = fs
    .readdirSync(job.root, { withFileTypes: true })
    .filter(e => e.isDirectory())
    .map(e => e.name)
    .sort();
  if (categories.length === 0) {
    throw new Error(`dataset root ${job.root} has no category directories`);
  }

  const nSlices = job.grid * job.grid;
  const skipped: ExportSummary['skipped'] = [];
  const lines: string[] = [];
  let images = 0;

  for (const category of categories) {
    const dir = path.join(job.root, category);
    const files = fs
      .readdirSync(dir, { withFileTypes: true })
      .filter(e => e.isFile())
      .map(e => e.name)
      .sort();
    for (const file of files) {
      const full = path.join(dir, file);
      let record: ImageRecord;
      try {
        const rgb = decodeImage(fs.readFileSync(full));
        const square = resize(rgb, RESCALE_SIZE, RESCALE_SIZE);
        const cells = sliceGrid(square, job.grid);
        record = {
          image_id: `${category}/${file}`,
          category,
          split: 'unassigned',
          sub_images: cells.map((cell, index) => ({
            index,
            tags: topTags(model, model.infer(cell), job.kTags),
          })),
        };
        validateRecord(record, nSlices, job.kTags);
      } catch (err) {
        const reason = err instanceof Error ? err.message : String(err);
        skipped.push({ file: full, reason });
        warn(`skipping ${full}: ${reason}`);
        continue;
      }
      lines.push(JSON.stringify(record));
      images += 1;
    }
  }

  fs.writeFileSync(job.out, lines.map(l => l + '\n').join(''), 'utf-8');
  return { images, skipped, categories };
}
