/** Reader for the core's captions.jsonl: one record per image, caption
 * order is the canonical candidate index. */

import { readFileSync } from "node:fs";

export interface CaptionRecord {
  imageId: string;
  captions: string[];
}

export function readCaptions(path: string): CaptionRecord[] {
  const records: CaptionRecord[] = [];
  const seen = new Set<string>();
  const lines = readFileSync(path, "utf-8").split("\n");
  lines.forEach((line, i) => {
    if (!line.trim()) return;
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`${path}:${i + 1}: malformed JSON: ${err}`);
    }
    const imageId = obj.image_id;
    const captions = obj.captions;
    if (typeof imageId !== "string" || !imageId) {
      throw new Error(`${path}:${i + 1}: image_id must be a non-empty string`);
    }
    if (
      !Array.isArray(captions) ||
      captions.length === 0 ||
      !captions.every((c: unknown) => typeof c === "string")
    ) {
      throw new Error(`${path}:${i + 1}: captions must be a non-empty string array`);
    }
    if (seen.has(imageId)) {
      throw new Error(`${path}:${i + 1}: duplicate image_id ${imageId}`);
    }
    seen.add(imageId);
    records.push({ imageId, captions });
  });
  return records;
}
