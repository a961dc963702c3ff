import { mkdirSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
export const JPEG_MAGIC = Buffer.from([0xff, 0xd8, 0xff, 0xe0]);

/** Bytes with a valid PNG signature; the tag makes the content unique. */
export function pngBytes(tag: string): Buffer {
  return Buffer.concat([PNG_MAGIC, Buffer.from(`payload:${tag}`, "utf-8")]);
}

export function makeTempDir(prefix = "extract-test-"): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

/** Lay out <root>/<split>/<class>/<file> from nested maps of file bytes. */
export function makeSplit(
  root: string,
  split: string,
  classes: Record<string, Record<string, Buffer>>,
): void {
  for (const [className, files] of Object.entries(classes)) {
    const dir = join(root, split, className);
    mkdirSync(dir, { recursive: true });
    for (const [fileName, bytes] of Object.entries(files)) {
      writeFileSync(join(dir, fileName), bytes);
    }
  }
}

export interface JobFileOptions {
  dir: string;
  split?: string;
  backboneTag?: string;
  template?: string;
  captions?: Record<string, string>;
  classNames?: string[];
  datasetName?: string;
}

/** Write dataset-relative job.json (and captions.json if given) under dir. */
export function writeJobFile(options: JobFileOptions): string {
  const job: Record<string, unknown> = {
    dataset_root: "data",
    split: options.split ?? "train",
    backbone_tag: options.backboneTag ?? "ViT-B/32",
    template: options.template ?? "a photo of a {}.",
    output_dir: "out",
  };
  if (options.captions !== undefined) {
    const captionsPath = join(options.dir, "captions.json");
    writeFileSync(captionsPath, JSON.stringify(options.captions, null, 2));
    job.captions_file = "captions.json";
  }
  if (options.classNames !== undefined) {
    job.class_names = options.classNames;
  }
  if (options.datasetName !== undefined) {
    job.dataset_name = options.datasetName;
  }
  const path = join(options.dir, "job.json");
  writeFileSync(path, JSON.stringify(job, null, 2));
  return path;
}

/** A two-class, three-images-per-class dataset plus matching captions. */
export function makeToyDataset(dir: string, split = "train"): Record<string, string> {
  makeSplit(join(dir, "data"), split, {
    ant: {
      "a1.png": pngBytes("ant-one"),
      "a2.png": pngBytes("ant-two"),
      "a3.png": pngBytes("ant-three"),
    },
    bee: {
      "b1.png": pngBytes("bee-one"),
      "b2.png": pngBytes("bee-two"),
      "b3.png": pngBytes("bee-three"),
    },
  });
  return {
    "ant/a1.png": "an ant crawling over bark",
    "ant/a2.png": "a small ant on a leaf",
    "ant/a3.png": "close-up of an ant",
    "bee/b1.png": "a bee on a flower",
    "bee/b2.png": "a honey bee in flight",
    "bee/b3.png": "a bee gathering pollen",
  };
}
