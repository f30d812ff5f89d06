/**
 * Backbone registry. "toy-color" is the built-in offline backbone; any
 * other name is treated as a Hugging Face model id and loaded through
 * @huggingface/transformers if that package (and its weights) are
 * available in the environment.
 */

import { readPpm } from "./ppm.js";
import * as toycolor from "./toycolor.js";

export interface Backbone {
  name: string;
  dim: number;
  embedImage(path: string): Promise<Float32Array>;
  embedCaption(text: string): Promise<Float32Array>;
  /** Higher = better pair. Backends producing losses must negate here. */
  matchScore(imageEmb: Float32Array, captionEmb: Float32Array): number;
}

class ToyColorBackbone implements Backbone {
  name = "toy-color";
  dim = toycolor.DIM;

  async embedImage(path: string): Promise<Float32Array> {
    return toycolor.embedImage(readPpm(path));
  }

  async embedCaption(text: string): Promise<Float32Array> {
    return toycolor.embedCaption(text);
  }

  matchScore(imageEmb: Float32Array, captionEmb: Float32Array): number {
    return toycolor.matchScore(imageEmb, captionEmb);
  }
}

class HfClipBackbone implements Backbone {
  name: string;
  dim = 0;
  private modules: any;
  private tokenizer: any;
  private textModel: any;
  private processor: any;
  private visionModel: any;

  constructor(name: string) {
    this.name = name;
  }

  async init(): Promise<void> {
    let hf: any;
    // Optional dependency: resolved at runtime only, so the offline
    // backbone works without it installed.
    const moduleName = "@huggingface/transformers";
    try {
      hf = await import(moduleName);
    } catch {
      throw new Error(
        `backbone ${this.name}: @huggingface/transformers is not installed; ` +
          `use --model toy-color for the offline backbone`,
      );
    }
    this.modules = hf;
    this.tokenizer = await hf.AutoTokenizer.from_pretrained(this.name);
    this.textModel = await hf.CLIPTextModelWithProjection.from_pretrained(this.name);
    this.processor = await hf.AutoProcessor.from_pretrained(this.name);
    this.visionModel = await hf.CLIPVisionModelWithProjection.from_pretrained(this.name);
  }

  async embedImage(path: string): Promise<Float32Array> {
    const image = await this.modules.RawImage.read(path);
    const inputs = await this.processor(image);
    const { image_embeds } = await this.visionModel(inputs);
    const row = Float32Array.from(image_embeds.data as Iterable<number>);
    this.dim = this.dim || row.length;
    return row;
  }

  async embedCaption(text: string): Promise<Float32Array> {
    const inputs = this.tokenizer([text], { padding: true, truncation: true });
    const { text_embeds } = await this.textModel(inputs);
    const row = Float32Array.from(text_embeds.data as Iterable<number>);
    this.dim = this.dim || row.length;
    return row;
  }

  matchScore(imageEmb: Float32Array, captionEmb: Float32Array): number {
    return toycolor.matchScore(imageEmb, captionEmb);
  }
}

export async function loadBackbone(name: string): Promise<Backbone> {
  if (name === "toy-color") {
    return new ToyColorBackbone();
  }
  const backbone = new HfClipBackbone(name);
  await backbone.init();
  return backbone;
}
