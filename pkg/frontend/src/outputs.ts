/**
 * Output naming and the identifier index sidecar.
 *
 * Every extraction emits a triple: the EMB1 matrix, a JSON manifest, and an
 * identifier index — one id per line, UTF-8 — recording what each row is.
 */
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { atomicWriteFile } from "./emb1.js";
import { InputError } from "./errors.js";
import type { ExtractionJob } from "./job.js";

export interface OutputTriple {
  embeddings: string;
  manifest: string;
  index: string;
}

function triple(dir: string, stem: string): OutputTriple {
  return {
    embeddings: join(dir, `${stem}.emb`),
    manifest: join(dir, `${stem}.manifest.json`),
    index: join(dir, `${stem}.ids`),
  };
}

export function imageOutputs(job: ExtractionJob): OutputTriple {
  return triple(job.outputDir, `${job.split}_images`);
}

export function prototypeOutputs(job: ExtractionJob): OutputTriple {
  return triple(job.outputDir, "prototypes");
}

export function captionOutputs(job: ExtractionJob): OutputTriple {
  return triple(job.outputDir, `${job.split}_captions`);
}

export function writeIndex(ids: string[], path: string): void {
  for (const id of ids) {
    if (id.includes("\n")) {
      throw new InputError(`identifier ${JSON.stringify(id)} contains a newline`);
    }
  }
  atomicWriteFile(path, ids.join("\n") + "\n");
}

export function readIndex(path: string): string[] {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new InputError(`cannot read identifier index ${path}: ${err instanceof Error ? err.message : err}`);
  }
  const ids = text.split("\n");
  while (ids.length > 0 && ids[ids.length - 1] === "") {
    ids.pop();
  }
  if (ids.length === 0) {
    throw new InputError(`identifier index ${path} is empty`);
  }
  return ids;
}
