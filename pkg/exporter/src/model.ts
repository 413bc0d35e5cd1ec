/**
 * Sub-image classifiers producing softmax-scored label distributions.
 *
 * The built-in `histogram-v1` model is fully deterministic: pixel
 * statistics are projected through per-label weights derived from a
 * seeded hash of the label name, then softmaxed. It stands in for a
 * pretrained network where downloading weights is not possible; any
 * model id other than the built-ins is treated as missing weights.
 */

import { RgbImage, resize } from './image.js';
import { TagRecord } from './schema.js';

export interface TagModel {
  id: string;
  inputSize: number;
  vocabulary: string[];
  /** Softmax distribution over the vocabulary for one sub-image. */
  infer(img: RgbImage): Float64Array;
}

/** ImageNet-style indoor object labels, already normalized. */
export const VOCABULARY: string[] = [
  'analog_clock', 'barber_chair', 'bathtub', 'beer_glass', 'bookcase',
  'book_jacket', 'bookshop', 'candle', 'carton', 'china_cabinet',
  'coffee_mug', 'coffeepot', 'comic_book', 'crate', 'crib',
  'desk', 'desktop_computer', 'dining_table', 'dishwasher', 'electric_fan',
  'envelope', 'file_cabinet', 'folding_chair', 'four_poster', 'goblet',
  'grocery_store', 'home_theater', 'lampshade', 'laptop', 'library',
  'medicine_chest', 'menu', 'microwave', 'monitor', 'mouse',
  'notebook', 'park_bench', 'photocopier', 'pillow', 'pitcher',
  'plate_rack', 'pool_table', 'printer', 'projector', 'quilt',
  'radiator', 'refrigerator', 'restaurant', 'rocking_chair', 'shower_curtain',
  'sliding_door', 'soup_bowl', 'space_heater', 'stove', 'studio_couch',
  'table_lamp', 'television', 'throne', 'toaster', 'tray',
  'vacuum', 'vase', 'wall_clock', 'wardrobe', 'washbasin', 'wine_bottle',
];

/** FNV-1a, stable across runs and platforms. */
function hash32(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const FEATURE_COUNT = 14;

/** Mean channels, luma spread, gradient energy, and an 8-bin luma histogram. */
function pixelFeatures(img: RgbImage): Float64Array {
  const n = img.width * img.height;
  const f = new Float64Array(FEATURE_COUNT);
  const hist = new Float64Array(8);
  let sumLuma = 0;
  let sumLuma2 = 0;
  for (let p = 0; p < n; p++) {
    const r = img.data[p * 3];
    const g = img.data[p * 3 + 1];
    const b = img.data[p * 3 + 2];
    f[0] += r;
    f[1] += g;
    f[2] += b;
    const luma = 0.299 * r + 0.587 * g + 0.114 * b;
    sumLuma += luma;
    sumLuma2 += luma * luma;
    hist[Math.min(7, Math.floor(luma / 32))] += 1;
  }
  f[0] /= n * 255;
  f[1] /= n * 255;
  f[2] /= n * 255;
  const mean = sumLuma / n;
  f[3] = Math.sqrt(Math.max(0, sumLuma2 / n - mean * mean)) / 128;
  let gx = 0;
  let gy = 0;
  for (let y = 0; y < img.height; y++) {
    for (let x = 0; x < img.width; x++) {
      const here = img.data[(y * img.width + x) * 3];
      if (x + 1 < img.width) gx += Math.abs(img.data[(y * img.width + x + 1) * 3] - here);
      if (y + 1 < img.height) gy += Math.abs(img.data[((y + 1) * img.width + x) * 3] - here);
    }
  }
  f[4] = gx / (n * 255);
  f[5] = gy / (n * 255);
  for (let i = 0; i < 8; i++) f[6 + i] = hist[i] / n;
  return f;
}

class HistogramModel implements TagModel {
  id = 'histogram-v1';
  inputSize = 64;
  vocabulary = VOCABULARY;
  private weights: Float64Array[];

  constructor() {
    this.weights = VOCABULARY.map(label => {
      const rand = mulberry32(hash32(`histogram-v1:${label}`));
      const w = new Float64Array(FEATURE_COUNT);
      for (let i = 0; i < FEATURE_COUNT; i++) w[i] = (rand() - 0.5) * 6;
      return w;
    });
  }

  infer(img: RgbImage): Float64Array {
    const scaled = img.width === this.inputSize && img.height === this.inputSize
      ? img
      : resize(img, this.inputSize, this.inputSize);
    const feats = pixelFeatures(scaled);
    const logits = this.weights.map(w => {
      let dot = 0;
      for (let i = 0; i < FEATURE_COUNT; i++) dot += w[i] * feats[i];
      return dot;
    });
    const top = Math.max(...logits);
    const exps = logits.map(v => Math.exp(v - top));
    const total = exps.reduce((a, b) => a + b, 0);
    return Float64Array.from(exps, v => v / total);
  }
}

const BUILTINS: Record<string, () => TagModel> = {
  'histogram-v1': () => new HistogramModel(),
};

export function loadModel(id: string): TagModel {
  const factory = BUILTINS[id];
  if (!factory) {
    throw new Error(
      `model weights for ${JSON.stringify(id)} are not available; built-ins: ${Object.keys(BUILTINS).join(', ')}`,
    );
  }
  return factory();
}

/** Top-k labels by score descending, ties by label ascending. */
export function topTags(model: TagModel, scores: Float64Array, k: number): TagRecord[] {
  const order = model.vocabulary
    .map((label, i) => ({ label, score: scores[i] }))
    .sort((a, b) => (b.score - a.score) || (a.label < b.label ? -1 : 1));
  return order.slice(0, k);
}
