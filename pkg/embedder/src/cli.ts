#!/usr/bin/env node
/**
 * caprank-embedder: dump image/caption embeddings (and optionally the
 * "itm" match-score channel) for a caption corpus, in the core's
 * interchange formats.
 *
 * Usage:
 *   caprank-embedder --images <dir> --captions captions.jsonl \
 *     --model toy-color --out-dir out [--itm] [--channel name]
 *
 * Images are looked up as <dir>/<image_id>.<ext>. An unreadable image is
 * logged to <out-dir>/errors.jsonl and its rows are written as zeros so
 * row/index alignment never breaks.
 */

import { appendFileSync, existsSync, mkdirSync } from "node:fs";
import { join } from "node:path";
import { exit } from "node:process";

import { Backbone, loadBackbone } from "./backbone.js";
import { readCaptions } from "./captions.js";
import {
  CaptionId,
  writeCaptionEmbeddings,
  writeImageEmbeddings,
  writeScoreTable,
  ScoreRecord,
} from "./formats.js";

const IMAGE_EXTENSIONS = [".ppm", ".png", ".jpg", ".jpeg"];

interface Args {
  images: string;
  captions: string;
  model: string;
  outDir: string;
  itm: boolean;
  channel: string;
}

function parseArgs(argv: string[]): Args {
  const args: Record<string, string | boolean> = { model: "toy-color", itm: false };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--images":
        args.images = argv[++i];
        break;
      case "--captions":
        args.captions = argv[++i];
        break;
      case "--model":
        args.model = argv[++i];
        break;
      case "--out-dir":
        args.outDir = argv[++i];
        break;
      case "--channel":
        args.channel = argv[++i];
        break;
      case "--itm":
        args.itm = true;
        break;
      default:
        throw new Error(`unknown argument: ${argv[i]}`);
    }
  }
  for (const required of ["images", "captions", "outDir"]) {
    if (!args[required]) {
      throw new Error(`missing --${required === "outDir" ? "out-dir" : required}`);
    }
  }
  args.channel = args.channel ?? (args.model as string);
  return args as unknown as Args;
}

function findImage(dir: string, imageId: string): string | null {
  for (const ext of IMAGE_EXTENSIONS) {
    const path = join(dir, imageId + ext);
    if (existsSync(path)) return path;
  }
  return null;
}

export async function run(argv: string[]): Promise<number> {
  const args = parseArgs(argv);
  mkdirSync(args.outDir, { recursive: true });
  const errorLog = join(args.outDir, "errors.jsonl");
  const backbone: Backbone = await loadBackbone(args.model);
  const records = readCaptions(args.captions);

  let failures = 0;
  const logError = (imageId: string, path: string | null, error: unknown) => {
    failures++;
    const line = JSON.stringify({ image_id: imageId, path, error: String(error) });
    appendFileSync(errorLog, `${line}\n`, "utf-8");
    console.error(`error: image ${imageId}: ${error}`);
  };

  const imageRows: Float32Array[] = [];
  const imageIds: string[] = [];
  const captionRows: Float32Array[] = [];
  const captionIds: CaptionId[] = [];
  const itmRecords: ScoreRecord[] = [];

  for (const rec of records) {
    const path = findImage(args.images, rec.imageId);
    let imageEmb: Float32Array | null = null;
    if (path === null) {
      logError(rec.imageId, null, "no image file found");
    } else {
      try {
        imageEmb = await backbone.embedImage(path);
      } catch (err) {
        logError(rec.imageId, path, err);
      }
    }
    const dim = backbone.dim || imageEmb?.length || 1;
    imageRows.push(imageEmb ?? new Float32Array(dim));
    imageIds.push(rec.imageId);

    const perCaption: Float32Array[] = [];
    for (let k = 0; k < rec.captions.length; k++) {
      const captionEmb = await backbone.embedCaption(rec.captions[k]);
      perCaption.push(captionEmb);
      captionRows.push(captionEmb);
      captionIds.push({ imageId: rec.imageId, captionIndex: k });
    }
    if (args.itm) {
      const imageVec = imageEmb ?? new Float32Array(backbone.dim || 1);
      itmRecords.push({
        imageId: rec.imageId,
        channel: "itm",
        scores: perCaption.map((c) => backbone.matchScore(imageVec, c)),
      });
    }
  }

  const dim = backbone.dim || imageRows[0]?.length || 1;
  writeImageEmbeddings(
    join(args.outDir, `${args.channel}.images.emb`),
    join(args.outDir, `${args.channel}.images.idx`),
    imageRows,
    imageIds,
    dim,
  );
  writeCaptionEmbeddings(
    join(args.outDir, `${args.channel}.captions.emb`),
    join(args.outDir, `${args.channel}.captions.idx`),
    captionRows,
    captionIds,
    dim,
  );
  if (args.itm) {
    writeScoreTable(join(args.outDir, "itm.jsonl"), itmRecords);
  }
  console.log(
    `wrote ${imageRows.length} image rows, ${captionRows.length} caption rows ` +
      `(dim ${dim}, channel ${args.channel})${args.itm ? " + itm channel" : ""}` +
      `${failures ? `; ${failures} image failures logged` : ""}`,
  );
  return 0;
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isMain) {
  run(process.argv.slice(2))
    .then((code) => exit(code))
    .catch((err) => {
      console.error(`error: ${err instanceof Error ? err.message : err}`);
      exit(2);
    });
}
