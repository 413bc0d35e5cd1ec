/**
 * JSONL record types shared with the feature pipeline, plus a local
 * validator mirroring its ingestion rules.
 */

export interface TagRecord {
  label: string;
  score: number;
}

export interface SubImageTags {
  index: number;
  tags: TagRecord[];
}

export interface ImageRecord {
  image_id: string;
  category: string;
  split: 'train' | 'test' | 'unassigned';
  sub_images: SubImageTags[];
}

/** Lowercase and replace every whitespace character with an underscore. */
export function normalizeLabel(label: string): string {
  return label.toLowerCase().replace(/\s/g, '_');
}

/** Throws when a record would be rejected by the pipeline's parser. */
export function validateRecord(record: ImageRecord, nSlices: number, kTags: number): void {
  if (!record.image_id) throw new Error('empty image_id');
  if (!record.category) throw new Error('empty category');
  if (record.sub_images.length !== nSlices) {
    throw new Error(`expected ${nSlices} sub-images, got ${record.sub_images.length}`);
  }
  const indices = record.sub_images.map(s => s.index).sort((a, b) => a - b);
  indices.forEach((idx, i) => {
    if (idx !== i) throw new Error(`sub-image indices must be exactly 0..${nSlices - 1}`);
  });
  for (const sub of record.sub_images) {
    if (sub.tags.length !== kTags) {
      throw new Error(`sub-image ${sub.index}: expected ${kTags} tags, got ${sub.tags.length}`);
    }
    let prev = Infinity;
    for (const tag of sub.tags) {
      if (tag.label !== normalizeLabel(tag.label) || tag.label.length === 0) {
        throw new Error(`sub-image ${sub.index}: label ${JSON.stringify(tag.label)} not normalized`);
      }
      if (!(tag.score >= 0 && tag.score <= 1)) {
        throw new Error(`sub-image ${sub.index}: score ${tag.score} outside [0, 1]`);
      }
      if (tag.score > prev) {
        throw new Error(`sub-image ${sub.index}: tag scores must be non-increasing`);
      }
      prev = tag.score;
    }
  }
}
