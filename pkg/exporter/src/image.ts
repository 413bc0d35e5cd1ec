/**
 * Decode, rescale, and slice images into row-major sub-image grids.
 *
 * PNG and JPEG are decoded to 8-bit RGB; grayscale sources come out with
 * the gray value replicated into all three channels.
 */

import jpeg from 'jpeg-js';
import { PNG } from 'pngjs';

export interface RgbImage {
  width: number;
  height: number;
  /** Packed RGB, 3 bytes per pixel, row-major. */
  data: Uint8Array;
}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47]);
const JPEG_MAGIC = Buffer.from([0xff, 0xd8]);

function rgbaToRgb(data: Uint8Array | Buffer, width: number, height: number): RgbImage {
  const out = new Uint8Array(width * height * 3);
  for (let p = 0; p < width * height; p++) {
    out[p * 3] = data[p * 4];
    out[p * 3 + 1] = data[p * 4 + 1];
    out[p * 3 + 2] = data[p * 4 + 2];
  }
  return { width, height, data: out };
}

/** Decode a PNG or JPEG buffer; throws on anything else. */
export function decodeImage(buffer: Buffer): RgbImage {
  if (buffer.subarray(0, 4).equals(PNG_MAGIC)) {
    // pngjs expands palette/grayscale to RGBA, which covers the
    // gray-to-3-channel replication requirement
    const png = PNG.sync.read(buffer);
    return rgbaToRgb(png.data, png.width, png.height);
  }
  if (buffer.subarray(0, 2).equals(JPEG_MAGIC)) {
    const img = jpeg.decode(buffer, { useTArray: true, maxMemoryUsageInMB: 64 });
    return rgbaToRgb(img.data, img.width, img.height);
  }
  throw new Error('unsupported image format (expected PNG or JPEG)');
}

/** Bilinear resize. */
export function resize(img: RgbImage, width: number, height: number): RgbImage {
  const out = new Uint8Array(width * height * 3);
  const xRatio = img.width / width;
  const yRatio = img.height / height;
  for (let y = 0; y < height; y++) {
    const sy = Math.min((y + 0.5) * yRatio - 0.5, img.height - 1);
    const y0 = Math.max(0, Math.floor(sy));
    const y1 = Math.min(img.height - 1, y0 + 1);
    const fy = sy - y0;
    for (let x = 0; x < width; x++) {
      const sx = Math.min((x + 0.5) * xRatio - 0.5, img.width - 1);
      const x0 = Math.max(0, Math.floor(sx));
      const x1 = Math.min(img.width - 1, x0 + 1);
      const fx = sx - x0;
      for (let c = 0; c < 3; c++) {
        const p00 = img.data[(y0 * img.width + x0) * 3 + c];
        const p01 = img.data[(y0 * img.width + x1) * 3 + c];
        const p10 = img.data[(y1 * img.width + x0) * 3 + c];
        const p11 = img.data[(y1 * img.width + x1) * 3 + c];
        const top = p00 + (p01 - p00) * fx;
        const bottom = p10 + (p11 - p10) * fx;
        out[(y * width + x) * 3 + c] = Math.round(top + (bottom - top) * fy);
      }
    }
  }
  return { width, height, data: out };
}

export function crop(img: RgbImage, left: number, top: number, width: number, height: number): RgbImage {
  const out = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    const src = ((top + y) * img.width + left) * 3;
    out.set(img.data.subarray(src, src + width * 3), y * width * 3);
  }
  return { width, height, data: out };
}

/**
 * Slice into grid x grid cells, row-major: cell (r, c) gets index
 * r * grid + c. The image side must be divisible by the grid.
 */
export function sliceGrid(img: RgbImage, grid: number): RgbImage[] {
  if (img.width % grid !== 0 || img.height % grid !== 0) {
    throw new Error(`image ${img.width}x${img.height} not divisible into ${grid}x${grid}`);
  }
  const cw = img.width / grid;
  const ch = img.height / grid;
  const cells: RgbImage[] = [];
  for (let r = 0; r < grid; r++) {
    for (let c = 0; c < grid; c++) {
      cells.push(crop(img, c * cw, r * ch, cw, ch));
    }
  }
  return cells;
}
