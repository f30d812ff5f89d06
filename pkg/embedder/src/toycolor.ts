/**
 * Deterministic offline backbone: images embed as a histogram over a fixed
 * named-color palette, captions as a bag of the palette words they mention.
 * A caption that names its image's colors lands near the image in the
 * shared 12-dim space, which is all the pipeline plumbing needs to be
 * exercised end to end without model weights.
 */

import { Image } from "./ppm.js";

export const PALETTE: Array<[string, number, number, number]> = [
  ["red", 220, 40, 40],
  ["green", 40, 180, 60],
  ["blue", 40, 80, 220],
  ["yellow", 230, 220, 50],
  ["orange", 240, 140, 30],
  ["purple", 150, 60, 200],
  ["pink", 240, 130, 180],
  ["brown", 130, 80, 40],
  ["black", 20, 20, 20],
  ["white", 240, 240, 240],
  ["gray", 128, 128, 128],
  ["cyan", 60, 200, 220],
];

export const DIM = PALETTE.length;

export function nearestPaletteIndex(r: number, g: number, b: number): number {
  let best = 0;
  let bestDist = Infinity;
  for (let i = 0; i < PALETTE.length; i++) {
    const [, pr, pg, pb] = PALETTE[i];
    const dist = (r - pr) ** 2 + (g - pg) ** 2 + (b - pb) ** 2;
    if (dist < bestDist) {
      bestDist = dist;
      best = i;
    }
  }
  return best;
}

export function embedImage(image: Image): Float32Array {
  const hist = new Float64Array(DIM);
  const { pixels } = image;
  for (let p = 0; p < pixels.length; p += 3) {
    hist[nearestPaletteIndex(pixels[p], pixels[p + 1], pixels[p + 2])] += 1;
  }
  return l2Normalize(hist);
}

export function embedCaption(caption: string): Float32Array {
  const counts = new Float64Array(DIM);
  const words = caption.toLowerCase().split(/[^a-z0-9]+/);
  for (const word of words) {
    const idx = PALETTE.findIndex(([name]) => name === word);
    if (idx >= 0) counts[idx] += 1;
  }
  return l2Normalize(counts);
}

/** Match score, higher = better pair; zero vectors score 0. */
export function matchScore(imageEmb: Float32Array, captionEmb: Float32Array): number {
  let dot = 0;
  let ni = 0;
  let nc = 0;
  for (let i = 0; i < imageEmb.length; i++) {
    dot += imageEmb[i] * captionEmb[i];
    ni += imageEmb[i] * imageEmb[i];
    nc += captionEmb[i] * captionEmb[i];
  }
  if (ni === 0 || nc === 0) return 0;
  return dot / Math.sqrt(ni * nc);
}

function l2Normalize(values: Float64Array): Float32Array {
  let norm = 0;
  for (const v of values) norm += v * v;
  norm = Math.sqrt(norm);
  const out = new Float32Array(values.length);
  if (norm > 0) {
    for (let i = 0; i < values.length; i++) out[i] = values[i] / norm;
  }
  return out;
}
