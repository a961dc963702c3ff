#!/usr/bin/env node
/**
 * idea-extract: turn a raw image dataset into EMB1 embedding files.
 *
 *   idea-extract images     --job job.json   encode every image in a split
 *   idea-extract prototypes --job job.json   encode one prompt per class
 *   idea-extract captions   --job job.json   encode captions in image order
 *
 * Each subcommand emits an EMB1 matrix, a JSON manifest, and an identifier
 * index (one id per line). Warnings go to stderr; the summary to stdout.
 */
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { extractCaptionFeatures } from "./captions.js";
import { hashEncoder } from "./encoder.js";
import { ExtractError } from "./errors.js";
import { extractImageFeatures } from "./images.js";
import { loadJob } from "./job.js";
import { extractClassPrototypes } from "./prototypes.js";

interface CliArgs {
  job: string;
}

function runImages(args: CliArgs): void {
  const job = loadJob(args.job);
  const encoder = hashEncoder(job.backboneTag);
  const result = extractImageFeatures(job, encoder);
  const skipNote = result.skipped.length > 0 ? `, skipped ${result.skipped.length} unreadable` : "";
  console.log(
    `images: wrote ${result.matrix.rows} rows (dim ${result.matrix.dim}, ` +
      `${result.classNames.length} classes) to ${result.outputs.embeddings}${skipNote}`,
  );
}

function runPrototypes(args: CliArgs): void {
  const job = loadJob(args.job);
  const encoder = hashEncoder(job.backboneTag);
  const result = extractClassPrototypes(job, encoder);
  console.log(
    `prototypes: wrote ${result.matrix.rows} rows (dim ${result.matrix.dim}) to ${result.outputs.embeddings}`,
  );
}

function runCaptions(args: CliArgs): void {
  const job = loadJob(args.job);
  const encoder = hashEncoder(job.backboneTag);
  const result = extractCaptionFeatures(job, encoder);
  const clipNote = result.truncatedCount > 0 ? `, truncated ${result.truncatedCount} over-length` : "";
  console.log(
    `captions: wrote ${result.matrix.rows} rows (dim ${result.matrix.dim}) to ${result.outputs.embeddings}${clipNote}`,
  );
}

function guarded(run: (args: CliArgs) => void): (args: CliArgs) => void {
  return (args) => {
    try {
      run(args);
    } catch (err) {
      if (err instanceof ExtractError) {
        console.error(`idea-extract: error: ${err.message}`);
        process.exit(1);
      }
      throw err;
    }
  };
}

const jobOption = {
  job: {
    type: "string",
    demandOption: true,
    describe: "path to the extraction job JSON",
  },
} as const;

void yargs(hideBin(process.argv))
  .scriptName("idea-extract")
  .command("images", "encode every image in a dataset split", jobOption, guarded(runImages))
  .command("prototypes", "encode one prompt per class", jobOption, guarded(runPrototypes))
  .command("captions", "encode captions in image row order", jobOption, guarded(runCaptions))
  .demandCommand(1, "pick a subcommand: images, prototypes, or captions")
  .strict()
  .help()
  .parse();
