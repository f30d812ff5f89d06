/**
 * Writers for the core's interchange formats.
 *
 * Embedding files: 16-byte header (magic "ECOEMB1\0", dim as u32 LE,
 * row count as u32 LE) followed by float32 LE rows; total size is
 * exactly 16 + 4 * dim * rows. A line-delimited index sidecar binds
 * row k to id line k: bare image_id for image files,
 * "image_id<TAB>caption_index" for caption files.
 */

import { writeFileSync } from "node:fs";

export const EMBEDDING_MAGIC = "ECOEMB1\0";

export type CaptionId = { imageId: string; captionIndex: number };

export function encodeEmbeddings(rows: Float32Array[], dim: number): Buffer {
  const header = Buffer.alloc(16);
  header.write(EMBEDDING_MAGIC, 0, "latin1");
  header.writeUInt32LE(dim, 8);
  header.writeUInt32LE(rows.length, 12);
  const body = Buffer.alloc(4 * dim * rows.length);
  rows.forEach((row, r) => {
    if (row.length !== dim) {
      throw new Error(`row ${r} has dim ${row.length}, expected ${dim}`);
    }
    for (let c = 0; c < dim; c++) {
      const v = row[c];
      if (!Number.isFinite(v)) {
        throw new Error(`non-finite value at row ${r}, column ${c}`);
      }
      body.writeFloatLE(v, 4 * (r * dim + c));
    }
  });
  return Buffer.concat([header, body]);
}

export function writeImageEmbeddings(
  embPath: string,
  idxPath: string,
  rows: Float32Array[],
  ids: string[],
  dim: number,
): void {
  if (ids.length !== rows.length) {
    throw new Error(`${ids.length} ids for ${rows.length} rows`);
  }
  writeFileSync(embPath, encodeEmbeddings(rows, dim));
  writeFileSync(idxPath, ids.map((id) => `${id}\n`).join(""), "utf-8");
}

export function writeCaptionEmbeddings(
  embPath: string,
  idxPath: string,
  rows: Float32Array[],
  ids: CaptionId[],
  dim: number,
): void {
  if (ids.length !== rows.length) {
    throw new Error(`${ids.length} ids for ${rows.length} rows`);
  }
  writeFileSync(embPath, encodeEmbeddings(rows, dim));
  writeFileSync(
    idxPath,
    ids.map((id) => `${id.imageId}\t${id.captionIndex}\n`).join(""),
    "utf-8",
  );
}

export interface ScoreRecord {
  imageId: string;
  channel: string;
  scores: number[];
}

/** Score-table JSONL; JSON.stringify keeps float64 round-trip precision. */
export function writeScoreTable(path: string, records: ScoreRecord[]): void {
  const lines = records.map((rec) => {
    for (const v of rec.scores) {
      if (!Number.isFinite(v)) {
        throw new Error(`non-finite score for image ${rec.imageId}`);
      }
    }
    return JSON.stringify({
      image_id: rec.imageId,
      channel: rec.channel,
      scores: rec.scores,
    });
  });
  writeFileSync(path, lines.map((l) => `${l}\n`).join(""), "utf-8");
}
