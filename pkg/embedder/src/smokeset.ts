/**
 * Procedural 10-image smoke set: each image is a two-color PPM whose true
 * caption names its colors; the candidate list pairs the true caption
 * with the next image's caption, so match scores have a known ordering.
 */

import { writeFileSync } from "node:fs";
import { join } from "node:path";

import { Image, writePpm } from "./ppm.js";
import { PALETTE } from "./toycolor.js";

export interface SmokeImage {
  imageId: string;
  colors: [string, string];
  caption: string;
}

const COLOR_PAIRS: Array<[string, string]> = [
  ["red", "blue"],
  ["green", "yellow"],
  ["purple", "orange"],
  ["pink", "brown"],
  ["black", "white"],
  ["gray", "cyan"],
  ["red", "green"],
  ["blue", "yellow"],
  ["orange", "pink"],
  ["purple", "cyan"],
];

function rgbOf(name: string): [number, number, number] {
  const entry = PALETTE.find(([n]) => n === name);
  if (!entry) throw new Error(`unknown palette color ${name}`);
  return [entry[1], entry[2], entry[3]];
}

function makeImage(colors: [string, string], size = 16): Image {
  const pixels = new Uint8Array(size * size * 3);
  const [left, right] = colors.map(rgbOf);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const rgb = x < size / 2 ? left : right;
      const p = 3 * (y * size + x);
      pixels[p] = rgb[0];
      pixels[p + 1] = rgb[1];
      pixels[p + 2] = rgb[2];
    }
  }
  return { width: size, height: size, pixels };
}

export function generateSmokeSet(dir: string): SmokeImage[] {
  const images: SmokeImage[] = COLOR_PAIRS.map((colors, i) => ({
    imageId: `smoke${String(i).padStart(2, "0")}`,
    colors,
    caption: `a ${colors[0]} square beside a ${colors[1]} square`,
  }));
  for (const img of images) {
    writePpm(join(dir, `${img.imageId}.ppm`), makeImage(img.colors));
  }
  const lines = images.map((img, i) => {
    const shuffled = images[(i + 1) % images.length].caption;
    return JSON.stringify({ image_id: img.imageId, captions: [img.caption, shuffled] });
  });
  writeFileSync(join(dir, "captions.jsonl"), lines.map((l) => `${l}\n`).join(""), "utf-8");
  return images;
}
