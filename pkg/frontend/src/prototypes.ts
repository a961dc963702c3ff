/**
 * Class prototype encoding: one text feature row per class, from a prompt
 * template instantiated with each class name. Row n always corresponds to
 * classNames[n].
 */
import { writeEmb1, matrixFromRows, type EmbeddingMatrix } from "./emb1.js";
import type { Encoder } from "./encoder.js";
import { InputError } from "./errors.js";
import type { ExtractionJob } from "./job.js";
import { writeManifest, ROW_ORDER_CLASS_MAJOR, type Manifest } from "./manifest.js";
import { resolveClassNames } from "./images.js";
import { prototypeOutputs, writeIndex, type OutputTriple } from "./outputs.js";
import { tokenize } from "./tokenize.js";

export function instantiateTemplate(template: string, className: string): string {
  if (!template.includes("{}")) {
    throw new InputError('template must contain the "{}" placeholder');
  }
  return template.replaceAll("{}", className);
}

export function encodeClassPrototypes(
  classNames: string[],
  template: string,
  encoder: Encoder,
): EmbeddingMatrix {
  if (classNames.length === 0) {
    throw new InputError("class list must not be empty");
  }
  const seen = new Set<string>();
  classNames.forEach((name, i) => {
    if (name.trim() === "") {
      throw new InputError(`class name at position ${i} is empty`);
    }
    if (seen.has(name)) {
      throw new InputError(`duplicate class name ${JSON.stringify(name)}`);
    }
    seen.add(name);
  });
  const rows = classNames.map((name) =>
    encoder.encodeTokens(tokenize(instantiateTemplate(template, name))),
  );
  return matrixFromRows(rows, true);
}

export interface PrototypeExtractionResult {
  matrix: EmbeddingMatrix;
  classNames: string[];
  outputs: OutputTriple;
}

export function extractClassPrototypes(job: ExtractionJob, encoder: Encoder): PrototypeExtractionResult {
  const classNames = resolveClassNames(job);
  const matrix = encodeClassPrototypes(classNames, job.template, encoder);
  const manifest: Manifest = {
    datasetName: job.datasetName,
    numClasses: classNames.length,
    shots: 0,
    classNames,
    backboneTag: encoder.backboneTag,
    dim: encoder.dim,
    modality: "class-prototype",
    rowOrder: ROW_ORDER_CLASS_MAJOR,
  };
  const outputs = prototypeOutputs(job);
  writeEmb1(matrix, outputs.embeddings);
  writeManifest(manifest, outputs.manifest);
  writeIndex(classNames, outputs.index);
  return { matrix, classNames, outputs };
}
