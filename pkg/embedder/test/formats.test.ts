import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { encodeEmbeddings, writeCaptionEmbeddings, writeScoreTable } from "../src/formats.js";
import { readPpm, writePpm } from "../src/ppm.js";
import { embedCaption, embedImage, matchScore, DIM } from "../src/toycolor.js";

let dir: string;

beforeEach(() => {
  dir = mkdtempSync(join(tmpdir(), "embfmt-"));
});

afterEach(() => {
  rmSync(dir, { recursive: true, force: true });
});

describe("embedding file layout", () => {
  it("writes the 16-byte header and float32 LE rows", () => {
    const rows = [new Float32Array([1.5, -2.25, 0.5]), new Float32Array([0, 9, -1])];
    const buf = encodeEmbeddings(rows, 3);
    expect(buf.length).toBe(16 + 4 * 3 * 2);
    expect(buf.subarray(0, 8).toString("latin1")).toBe("ECOEMB1\0");
    expect(buf.readUInt32LE(8)).toBe(3);
    expect(buf.readUInt32LE(12)).toBe(2);
    expect(buf.readFloatLE(16)).toBeCloseTo(1.5, 6);
    expect(buf.readFloatLE(20)).toBeCloseTo(-2.25, 6);
    expect(buf.readFloatLE(16 + 4 * 5)).toBeCloseTo(-1, 6);
  });

  it("rejects ragged rows and non-finite values", () => {
    expect(() => encodeEmbeddings([new Float32Array(2)], 3)).toThrow(/dim/);
    expect(() => encodeEmbeddings([new Float32Array([NaN])], 1)).toThrow(/non-finite/);
  });

  it("writes tab-separated caption indices", () => {
    writeCaptionEmbeddings(
      join(dir, "c.emb"),
      join(dir, "c.idx"),
      [new Float32Array([1]), new Float32Array([2])],
      [
        { imageId: "img1", captionIndex: 0 },
        { imageId: "img1", captionIndex: 1 },
      ],
      1,
    );
    expect(readFileSync(join(dir, "c.idx"), "utf-8")).toBe("img1\t0\nimg1\t1\n");
  });
});

describe("score table", () => {
  it("writes one finite-valued record per line", () => {
    writeScoreTable(join(dir, "s.jsonl"), [
      { imageId: "a", channel: "itm", scores: [0.5, -0.25] },
    ]);
    const obj = JSON.parse(readFileSync(join(dir, "s.jsonl"), "utf-8"));
    expect(obj).toEqual({ image_id: "a", channel: "itm", scores: [0.5, -0.25] });
    expect(() =>
      writeScoreTable(join(dir, "bad.jsonl"), [
        { imageId: "a", channel: "itm", scores: [Infinity] },
      ]),
    ).toThrow(/non-finite/);
  });
});

describe("ppm round trip", () => {
  it("reads back what it wrote", () => {
    const image = {
      width: 2,
      height: 2,
      pixels: new Uint8Array([255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30]),
    };
    writePpm(join(dir, "t.ppm"), image);
    const back = readPpm(join(dir, "t.ppm"));
    expect(back.width).toBe(2);
    expect(back.height).toBe(2);
    expect([...back.pixels]).toEqual([...image.pixels]);
  });
});

describe("toy-color backbone", () => {
  it("embeds a solid image as a one-hot-ish histogram", () => {
    const pixels = new Uint8Array(4 * 3);
    for (let p = 0; p < pixels.length; p += 3) {
      pixels[p] = 220;
      pixels[p + 1] = 40;
      pixels[p + 2] = 40; // palette red
    }
    const emb = embedImage({ width: 2, height: 2, pixels });
    expect(emb.length).toBe(DIM);
    expect(emb[0]).toBeCloseTo(1.0, 6); // red is palette entry 0
  });

  it("scores matching captions above mismatched ones", () => {
    const pixels = new Uint8Array(4 * 3);
    for (let p = 0; p < pixels.length; p += 3) {
      pixels[p] = 40;
      pixels[p + 1] = 80;
      pixels[p + 2] = 220; // palette blue
    }
    const image = embedImage({ width: 2, height: 2, pixels });
    const good = embedCaption("a blue square on a table");
    const bad = embedCaption("a green horse in the park");
    expect(matchScore(image, good)).toBeGreaterThan(matchScore(image, bad));
  });

  it("scores captions without color words as zero", () => {
    const image = embedImage({ width: 1, height: 1, pixels: new Uint8Array([220, 40, 40]) });
    expect(matchScore(image, embedCaption("a dog runs far away"))).toBe(0);
  });
});
