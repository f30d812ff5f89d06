/** Minimal binary PPM (P6) reader/writer for the offline backbone. */

import { readFileSync, writeFileSync } from "node:fs";

export interface Image {
  width: number;
  height: number;
  /** RGB triples, row-major, 8-bit. */
  pixels: Uint8Array;
}

export function readPpm(path: string): Image {
  const data = readFileSync(path);
  let pos = 0;
  const token = (): string => {
    while (pos < data.length && isSpace(data[pos])) pos++;
    if (data[pos] === 0x23) {
      // comment line
      while (pos < data.length && data[pos] !== 0x0a) pos++;
      return token();
    }
    const start = pos;
    while (pos < data.length && !isSpace(data[pos])) pos++;
    return data.subarray(start, pos).toString("latin1");
  };
  const magic = token();
  if (magic !== "P6") {
    throw new Error(`${path}: not a binary PPM (magic ${magic})`);
  }
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0) || maxval !== 255) {
    throw new Error(`${path}: unsupported PPM header ${width}x${height}/${maxval}`);
  }
  pos++; // single whitespace after maxval
  const need = width * height * 3;
  if (data.length - pos < need) {
    throw new Error(`${path}: truncated pixel data`);
  }
  return { width, height, pixels: new Uint8Array(data.subarray(pos, pos + need)) };
}

export function writePpm(path: string, image: Image): void {
  const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, "latin1");
  writeFileSync(path, Buffer.concat([header, Buffer.from(image.pixels)]));
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}
