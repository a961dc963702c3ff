/**
 * Image feature extraction over a class-per-directory dataset layout:
 *
 *   <dataset_root>/<split>/<class_name>/<image files>
 *
 * Rows come out class-major — classes in sorted order, files sorted within
 * each class — and identifiers are "<class_name>/<file_name>". Files that
 * cannot be read or do not carry a recognized image signature are skipped
 * with a logged warning and counted in the summary instead of failing the
 * whole extraction.
 */
import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { writeEmb1, matrixFromRows, type EmbeddingMatrix } from "./emb1.js";
import type { Encoder } from "./encoder.js";
import { InputError } from "./errors.js";
import type { ExtractionJob } from "./job.js";
import { writeManifest, ROW_ORDER_CLASS_MAJOR, type Manifest } from "./manifest.js";
import { imageOutputs, writeIndex, type OutputTriple } from "./outputs.js";

const IMAGE_EXTENSIONS = new Set([".png", ".jpg", ".jpeg", ".gif", ".bmp", ".webp"]);

type Log = (message: string) => void;

/** Magic-byte check for the formats the extension filter admits. */
export function sniffImageFormat(bytes: Uint8Array): string | null {
  const startsWith = (sig: number[], at = 0) =>
    bytes.length >= at + sig.length && sig.every((b, i) => bytes[at + i] === b);
  if (startsWith([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a])) return "png";
  if (startsWith([0xff, 0xd8, 0xff])) return "jpeg";
  if (startsWith([0x47, 0x49, 0x46, 0x38])) return "gif";
  if (startsWith([0x42, 0x4d])) return "bmp";
  if (startsWith([0x52, 0x49, 0x46, 0x46]) && startsWith([0x57, 0x45, 0x42, 0x50], 8)) return "webp";
  return null;
}

function hasImageExtension(name: string): boolean {
  const dot = name.lastIndexOf(".");
  return dot >= 0 && IMAGE_EXTENSIONS.has(name.slice(dot).toLowerCase());
}

function listSorted(dir: string, kind: "dirs" | "files", context: string): string[] {
  let entries;
  try {
    entries = readdirSync(dir, { withFileTypes: true });
  } catch (err) {
    throw new InputError(`cannot list ${context} ${dir}: ${err instanceof Error ? err.message : err}`);
  }
  return entries
    .filter((e) => (kind === "dirs" ? e.isDirectory() : e.isFile()))
    .map((e) => e.name)
    .sort();
}

/** The split's class names: the job's list if given, else its subdirectories. */
export function resolveClassNames(job: ExtractionJob): string[] {
  const splitDir = join(job.datasetRoot, job.split);
  const discovered = listSorted(splitDir, "dirs", "split directory");
  if (job.classNames === undefined) {
    if (discovered.length === 0) {
      throw new InputError(`split directory ${splitDir} has no class subdirectories`);
    }
    return discovered;
  }
  const available = new Set(discovered);
  for (const name of job.classNames) {
    if (!available.has(name)) {
      throw new InputError(`class ${JSON.stringify(name)} has no directory under ${splitDir}`);
    }
  }
  return [...job.classNames];
}

export interface SkippedFile {
  identifier: string;
  reason: string;
}

export interface ImageExtractionResult {
  matrix: EmbeddingMatrix;
  identifiers: string[];
  classNames: string[];
  skipped: SkippedFile[];
  outputs: OutputTriple;
}

export function extractImageFeatures(
  job: ExtractionJob,
  encoder: Encoder,
  log: Log = (m) => console.error(m),
): ImageExtractionResult {
  const classNames = resolveClassNames(job);
  const splitDir = join(job.datasetRoot, job.split);
  const rows: Float32Array[] = [];
  const identifiers: string[] = [];
  const skipped: SkippedFile[] = [];

  for (const className of classNames) {
    const classDir = join(splitDir, className);
    for (const fileName of listSorted(classDir, "files", "class directory")) {
      if (!hasImageExtension(fileName)) {
        continue;
      }
      const identifier = `${className}/${fileName}`;
      let bytes: Buffer;
      try {
        bytes = readFileSync(join(classDir, fileName));
      } catch (err) {
        const reason = err instanceof Error ? err.message : String(err);
        skipped.push({ identifier, reason });
        log(`warning: skipping unreadable image ${identifier}: ${reason}`);
        continue;
      }
      if (sniffImageFormat(bytes) === null) {
        skipped.push({ identifier, reason: "unrecognized image signature" });
        log(`warning: skipping unreadable image ${identifier}: unrecognized image signature`);
        continue;
      }
      rows.push(encoder.encodeImage(bytes));
      identifiers.push(identifier);
    }
  }

  if (rows.length === 0) {
    throw new InputError(
      `no readable images under ${splitDir} (${skipped.length} skipped)`,
    );
  }

  const matrix = matrixFromRows(rows, true);
  const manifest: Manifest = {
    datasetName: job.datasetName,
    numClasses: classNames.length,
    shots: 0,
    classNames,
    backboneTag: encoder.backboneTag,
    dim: encoder.dim,
    modality: "image",
    rowOrder: ROW_ORDER_CLASS_MAJOR,
  };
  const outputs = imageOutputs(job);
  writeEmb1(matrix, outputs.embeddings);
  writeManifest(manifest, outputs.manifest);
  writeIndex(identifiers, outputs.index);
  return { matrix, identifiers, classNames, skipped, outputs };
}
