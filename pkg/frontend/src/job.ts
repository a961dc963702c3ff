/**
 * Extraction job descriptions: one JSON file drives all three subcommands.
 *
 * Relative paths in the job file resolve against the job file's directory,
 * so a job can travel with its dataset.
 */
import { readFileSync } from "node:fs";
import { dirname, isAbsolute, resolve } from "node:path";

import { z } from "zod";

import { BACKBONE_TAGS } from "./encoder.js";
import { InputError } from "./errors.js";

const jobSchema = z.object({
  /** Directory holding one subdirectory per split, each with one subdirectory per class. */
  dataset_root: z.string().min(1),
  split: z.string().min(1),
  backbone_tag: z.string().min(1),
  /** Class prompt template; "{}" is replaced by the class name. */
  template: z.string().min(1).default("a photo of a {}."),
  /** JSON object mapping image identifiers to caption strings. */
  captions_file: z.string().min(1).optional(),
  output_dir: z.string().min(1),
  dataset_name: z.string().min(1).optional(),
  /** Restricts extraction to these classes; defaults to the split's subdirectories. */
  class_names: z.array(z.string()).nonempty().optional(),
});

export interface ExtractionJob {
  datasetRoot: string;
  split: string;
  backboneTag: string;
  template: string;
  captionsFile?: string;
  outputDir: string;
  datasetName: string;
  classNames?: string[];
}

function resolveAgainst(base: string, path: string): string {
  return isAbsolute(path) ? path : resolve(base, path);
}

export function jobFromDict(raw: unknown, baseDir: string = "."): ExtractionJob {
  const parsed = jobSchema.safeParse(raw);
  if (!parsed.success) {
    const issue = parsed.error.issues[0]!;
    const where = issue.path.length > 0 ? `${issue.path.join(".")}: ` : "";
    throw new InputError(`invalid job: ${where}${issue.message}`);
  }
  const job = parsed.data;
  if (!BACKBONE_TAGS.includes(job.backbone_tag)) {
    throw new InputError(
      `invalid job: backbone_tag ${JSON.stringify(job.backbone_tag)} is not one of ${BACKBONE_TAGS.join(", ")}`,
    );
  }
  if (!job.template.includes("{}")) {
    throw new InputError('invalid job: template must contain the "{}" placeholder');
  }
  const datasetRoot = resolveAgainst(baseDir, job.dataset_root);
  return {
    datasetRoot,
    split: job.split,
    backboneTag: job.backbone_tag,
    template: job.template,
    captionsFile: job.captions_file === undefined ? undefined : resolveAgainst(baseDir, job.captions_file),
    outputDir: resolveAgainst(baseDir, job.output_dir),
    datasetName: job.dataset_name ?? datasetRoot.split("/").filter(Boolean).pop() ?? "dataset",
    classNames: job.class_names,
  };
}

export function loadJob(path: string): ExtractionJob {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new InputError(`cannot read job file ${path}: ${err instanceof Error ? err.message : err}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new InputError(`job file ${path} is not valid JSON: ${err instanceof Error ? err.message : err}`);
  }
  return jobFromDict(raw, dirname(path));
}
