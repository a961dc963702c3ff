/**
 * JSON sidecar describing one embedding file: dataset, classes, backbone,
 * dimension, row order, and what the rows are. The on-disk key set and
 * value vocabulary match what the evaluation package validates on load.
 */
import { InputError } from "./errors.js";
import { atomicWriteFile } from "./emb1.js";

export const MODALITIES = ["image", "text", "class-prototype", "test"] as const;
export type Modality = (typeof MODALITIES)[number];

export const ROW_ORDER_CLASS_MAJOR = "class-major";

export interface Manifest {
  datasetName: string;
  numClasses: number;
  /** Per-class row budget; 0 for files without one (full-split extractions). */
  shots: number;
  classNames: string[];
  backboneTag: string;
  dim: number;
  modality: Modality;
  rowOrder: string;
}

export function validateManifest(manifest: Manifest): void {
  if (manifest.numClasses < 1) {
    throw new InputError("num_classes must be at least 1");
  }
  if (manifest.shots < 0) {
    throw new InputError("shots must be non-negative");
  }
  if (manifest.dim < 1) {
    throw new InputError("dim must be at least 1");
  }
  if (manifest.classNames.length !== manifest.numClasses) {
    throw new InputError(
      `expected ${manifest.numClasses} class names, got ${manifest.classNames.length}`,
    );
  }
  if (new Set(manifest.classNames).size !== manifest.classNames.length) {
    throw new InputError("class names must be distinct");
  }
  if (manifest.rowOrder !== ROW_ORDER_CLASS_MAJOR) {
    throw new InputError(`unsupported row order ${JSON.stringify(manifest.rowOrder)}`);
  }
  if (!MODALITIES.includes(manifest.modality)) {
    throw new InputError(`modality must be one of ${MODALITIES.join(", ")}, got ${JSON.stringify(manifest.modality)}`);
  }
}

/** JSON with keys sorted at every level, matching the reader's canonical form. */
export function canonicalJson(value: unknown): string {
  return JSON.stringify(sortKeys(value), null, 2);
}

function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortKeys);
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>);
    entries.sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0));
    return Object.fromEntries(entries.map(([k, v]) => [k, sortKeys(v)]));
  }
  return value;
}

export function manifestToJson(manifest: Manifest): string {
  validateManifest(manifest);
  return (
    canonicalJson({
      dataset_name: manifest.datasetName,
      num_classes: manifest.numClasses,
      shots: manifest.shots,
      class_names: manifest.classNames,
      backbone_tag: manifest.backboneTag,
      dim: manifest.dim,
      row_order: manifest.rowOrder,
      modality: manifest.modality,
    }) + "\n"
  );
}

export function writeManifest(manifest: Manifest, path: string): void {
  atomicWriteFile(path, manifestToJson(manifest));
}
