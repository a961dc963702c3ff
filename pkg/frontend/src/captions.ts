/**
 * Caption encoding for the few-shot cache: one text feature row per cache
 * image, in exactly the image file's row order.
 *
 * Captions arrive as a JSON object keyed by image identifier. Every image
 * must have a caption; captions over the token budget are truncated (the
 * matching evaluation-side behavior is to compress, never drop data), each
 * with a logged warning, and the summary reports how many were clipped.
 */
import { readFileSync } from "node:fs";

import { writeEmb1, matrixFromRows, type EmbeddingMatrix } from "./emb1.js";
import type { Encoder } from "./encoder.js";
import { InputError, MissingKeyError } from "./errors.js";
import type { ExtractionJob } from "./job.js";
import { writeManifest, ROW_ORDER_CLASS_MAJOR, type Manifest } from "./manifest.js";
import { resolveClassNames } from "./images.js";
import { captionOutputs, imageOutputs, readIndex, writeIndex, type OutputTriple } from "./outputs.js";
import { tokenize, truncateTokens, TOKEN_BUDGET } from "./tokenize.js";

type Log = (message: string) => void;

export function loadCaptions(path: string): Map<string, string> {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new InputError(`cannot read captions file ${path}: ${err instanceof Error ? err.message : err}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new InputError(`captions file ${path} is not valid JSON: ${err instanceof Error ? err.message : err}`);
  }
  if (raw === null || typeof raw !== "object" || Array.isArray(raw)) {
    throw new InputError(`captions file ${path} must hold a JSON object mapping identifiers to captions`);
  }
  const captions = new Map<string, string>();
  for (const [key, value] of Object.entries(raw)) {
    if (typeof value !== "string") {
      throw new InputError(`captions file ${path}: caption for ${JSON.stringify(key)} is not a string`);
    }
    captions.set(key, value);
  }
  return captions;
}

export interface CaptionEncodingResult {
  matrix: EmbeddingMatrix;
  truncatedCount: number;
}

export function encodeCaptions(
  captions: Map<string, string>,
  imageIdentifiers: string[],
  encoder: Encoder,
  log: Log = (m) => console.error(m),
): CaptionEncodingResult {
  if (imageIdentifiers.length === 0) {
    throw new InputError("image identifier list must not be empty");
  }
  const missing = imageIdentifiers.filter((id) => !captions.has(id));
  if (missing.length > 0) {
    const shown = missing.slice(0, 3).map((id) => JSON.stringify(id)).join(", ");
    const more = missing.length > 3 ? ` and ${missing.length - 3} more` : "";
    throw new MissingKeyError(`no caption for ${shown}${more} (${missing.length} of ${imageIdentifiers.length} images)`);
  }
  let truncatedCount = 0;
  const rows = imageIdentifiers.map((id) => {
    const { tokens, truncated } = truncateTokens(tokenize(captions.get(id)!));
    if (truncated) {
      truncatedCount += 1;
      log(`warning: caption for ${id} exceeds ${TOKEN_BUDGET} tokens, truncated`);
    }
    return encoder.encodeTokens(tokens);
  });
  return { matrix: matrixFromRows(rows, true), truncatedCount };
}

export interface CaptionExtractionResult {
  matrix: EmbeddingMatrix;
  identifiers: string[];
  truncatedCount: number;
  outputs: OutputTriple;
}

export function extractCaptionFeatures(
  job: ExtractionJob,
  encoder: Encoder,
  log: Log = (m) => console.error(m),
): CaptionExtractionResult {
  if (job.captionsFile === undefined) {
    throw new InputError("job has no captions_file");
  }
  const imageIndexPath = imageOutputs(job).index;
  let identifiers: string[];
  try {
    identifiers = readIndex(imageIndexPath);
  } catch (err) {
    const detail = err instanceof Error ? err.message : String(err);
    throw new InputError(`${detail} (run the images step first)`);
  }
  const captions = loadCaptions(job.captionsFile);
  const { matrix, truncatedCount } = encodeCaptions(captions, identifiers, encoder, log);
  const classNames = resolveClassNames(job);
  const manifest: Manifest = {
    datasetName: job.datasetName,
    numClasses: classNames.length,
    shots: 0,
    classNames,
    backboneTag: encoder.backboneTag,
    dim: encoder.dim,
    modality: "text",
    rowOrder: ROW_ORDER_CLASS_MAJOR,
  };
  const outputs = captionOutputs(job);
  writeEmb1(matrix, outputs.embeddings);
  writeManifest(manifest, outputs.manifest);
  writeIndex(identifiers, outputs.index);
  return { matrix, identifiers, truncatedCount, outputs };
}
