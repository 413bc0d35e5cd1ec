import { execFileSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { PNG } from 'pngjs';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { decodeImage, resize, sliceGrid } from '../src/image.js';
import { loadModel, topTags, VOCABULARY } from '../src/model.js';
import { runExport } from '../src/export.js';
import { normalizeLabel, type ImageRecord } from '../src/schema.js';

let root: string;
let outDir: string;

/** Deterministic RGB gradient PNG. */
function writeRgbPng(file: string, width: number, height: number, phase: number): void {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      png.data[i] = (x * 3 + phase * 37) % 256;
      png.data[i + 1] = (y * 5 + phase * 11) % 256;
      png.data[i + 2] = (x + y + phase * 73) % 256;
      png.data[i + 3] = 255;
    }
  }
  fs.writeFileSync(file, PNG.sync.write(png));
}

/** 8-bit grayscale PNG (colorType 0) to exercise channel replication. */
function writeGrayPng(file: string, side: number): void {
  const png = new PNG({ width: side, height: side, colorType: 0 });
  for (let y = 0; y < side; y++) {
    for (let x = 0; x < side; x++) {
      const i = (y * side + x) * 4;
      const v = (x * y) % 256;
      png.data[i] = png.data[i + 1] = png.data[i + 2] = v;
      png.data[i + 3] = 255;
    }
  }
  fs.writeFileSync(file, PNG.sync.write(png, { colorType: 0 }));
}

beforeAll(() => {
  root = fs.mkdtempSync(path.join(os.tmpdir(), 'semfeat-fixture-'));
  outDir = fs.mkdtempSync(path.join(os.tmpdir(), 'semfeat-out-'));
  fs.mkdirSync(path.join(root, 'library'));
  fs.mkdirSync(path.join(root, 'kitchen'));
  writeRgbPng(path.join(root, 'library', 'img0.png'), 120, 90, 0);
  writeRgbPng(path.join(root, 'library', 'img1.png'), 64, 64, 1);
  writeRgbPng(path.join(root, 'library', 'img2.png'), 300, 300, 2);
  writeRgbPng(path.join(root, 'kitchen', 'img3.png'), 90, 150, 3);
  writeGrayPng(path.join(root, 'kitchen', 'img4.png'), 100);
});

afterAll(() => {
  fs.rmSync(root, { recursive: true, force: true });
  fs.rmSync(outDir, { recursive: true, force: true });
});

function exportFixture(name: string, grid: 3 | 4 | 5 = 3): { out: string; summary: ReturnType<typeof runExport> } {
  const out = path.join(outDir, name);
  const summary = runExport(
    { root, grid, kTags: 10, out, model: 'histogram-v1' },
    () => undefined,
  );
  return { out, summary };
}

function readRecords(file: string): ImageRecord[] {
  return fs
    .readFileSync(file, 'utf-8')
    .split('\n')
    .filter(l => l.trim())
    .map(l => JSON.parse(l));
}

describe('image utilities', () => {
  it('slices row-major into equal cells', () => {
    const img = { width: 6, height: 6, data: new Uint8Array(6 * 6 * 3).map((_, i) => i % 251) };
    const cells = sliceGrid(img, 3);
    expect(cells).toHaveLength(9);
    for (const cell of cells) {
      expect(cell.width).toBe(2);
      expect(cell.height).toBe(2);
    }
    // top-left pixel of cell (r=1, c=2) comes from (x=4, y=2)
    const cell = cells[1 * 3 + 2];
    const src = (2 * 6 + 4) * 3;
    expect(Array.from(cell.data.subarray(0, 3))).toEqual([
      img.data[src], img.data[src + 1], img.data[src + 2],
    ]);
  });

  it('replicates grayscale into three channels', () => {
    const file = path.join(root, 'kitchen', 'img4.png');
    const rgb = decodeImage(fs.readFileSync(file));
    for (let p = 0; p < rgb.width * rgb.height; p += 97) {
      expect(rgb.data[p * 3]).toBe(rgb.data[p * 3 + 1]);
      expect(rgb.data[p * 3]).toBe(rgb.data[p * 3 + 2]);
    }
  });

  it('resize preserves constant images', () => {
    const img = { width: 10, height: 10, data: new Uint8Array(300).fill(200) };
    const out = resize(img, 300, 300);
    expect(out.data.every(v => v === 200)).toBe(true);
  });
});

describe('tag model', () => {
  it('softmax distribution sums to one', () => {
    const img = { width: 8, height: 8, data: new Uint8Array(8 * 8 * 3).map((_, i) => (i * 7) % 256) };
    const scores = loadModel('histogram-v1').infer(img);
    const total = Array.from(scores).reduce((a, b) => a + b, 0);
    expect(total).toBeCloseTo(1.0, 9);
    expect(Math.min(...scores)).toBeGreaterThan(0);
  });

  it('top tags are sorted and normalized', () => {
    const model = loadModel('histogram-v1');
    const img = { width: 8, height: 8, data: new Uint8Array(8 * 8 * 3).map((_, i) => (i * 13) % 256) };
    const tags = topTags(model, model.infer(img), 10);
    expect(tags).toHaveLength(10);
    for (let i = 1; i < tags.length; i++) {
      expect(tags[i].score).toBeLessThanOrEqual(tags[i - 1].score);
    }
    for (const t of tags) expect(t.label).toBe(normalizeLabel(t.label));
  });

  it('unknown model id is fatal', () => {
    expect(() => loadModel('inception-v3')).toThrow(/weights/);
  });
});

describe('export', () => {
  it('writes one schema-valid line per image with exactly 10 ordered tags', () => {
    const { out, summary } = exportFixture('grid3.jsonl');
    expect(summary.images).toBe(5);
    expect(summary.skipped).toHaveLength(0);
    const records = readRecords(out);
    expect(records).toHaveLength(5);
    for (const rec of records) {
      expect(rec.sub_images).toHaveLength(9);
      rec.sub_images.forEach((sub, i) => {
        expect(sub.index).toBe(i);
        expect(sub.tags).toHaveLength(10);
        let prev = Infinity;
        for (const tag of sub.tags) {
          expect(tag.score).toBeGreaterThanOrEqual(0);
          expect(tag.score).toBeLessThanOrEqual(1);
          expect(tag.score).toBeLessThanOrEqual(prev);
          expect(VOCABULARY).toContain(tag.label);
          prev = tag.score;
        }
      });
    }
  });

  it('grid 4 yields 16 sub-images per image', () => {
    const { out } = exportFixture('grid4.jsonl', 4);
    for (const rec of readRecords(out)) expect(rec.sub_images).toHaveLength(16);
  });

  it('is deterministic across runs', () => {
    const a = exportFixture('det_a.jsonl');
    const b = exportFixture('det_b.jsonl');
    expect(fs.readFileSync(a.out)).toEqual(fs.readFileSync(b.out));
  });

  it('skips undecodable files with a warning and keeps going', () => {
    const broken = path.join(root, 'kitchen', 'broken.png');
    fs.writeFileSync(broken, Buffer.from('definitely not a png'));
    try {
      const warnings: string[] = [];
      const out = path.join(outDir, 'with_broken.jsonl');
      const summary = runExport(
        { root, grid: 3, kTags: 10, out, model: 'histogram-v1' },
        msg => warnings.push(msg),
      );
      expect(summary.images).toBe(5);
      expect(summary.skipped).toHaveLength(1);
      expect(summary.skipped[0].file).toContain('broken.png');
      expect(warnings.some(w => w.includes('broken.png'))).toBe(true);
    } finally {
      fs.rmSync(broken);
    }
  });

  it('output passes the feature pipeline parser with zero errors', () => {
    const { out } = exportFixture('cross_check.jsonl');
    const python = process.env.PYTHON ?? 'python3';
    const script = [
      'import sys',
      'from semfeat.ingest import load_corpus',
      'corpus = load_corpus(sys.argv[1])',
      'assert len(corpus.images) == 5, len(corpus.images)',
      'assert corpus.n_slices == 9 and corpus.k_tags == 10',
      "print('categories:', ','.join(corpus.categories))",
    ].join('\n');
    const stdout = execFileSync(python, ['-c', script, out], { encoding: 'utf-8' });
    expect(stdout).toContain('categories: kitchen,library');
  });
});
