import { readFileSync, writeFileSync, mkdirSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import {
  extractImageFeatures,
  hashEncoder,
  InputError,
  jobFromDict,
  readEmb1,
  readIndex,
  sniffImageFormat,
  type ExtractionJob,
} from "../dist/index.js";
import { JPEG_MAGIC, makeSplit, makeTempDir, pngBytes } from "./helpers.js";

const encoder = hashEncoder("ViT-B/32");

function jobFor(dir: string, extra: Record<string, unknown> = {}): ExtractionJob {
  return jobFromDict({
    dataset_root: join(dir, "data"),
    split: "train",
    backbone_tag: "ViT-B/32",
    output_dir: join(dir, "out"),
    ...extra,
  });
}

function rowBuffer(data: Float32Array, dim: number, i: number): Buffer {
  return Buffer.from(data.buffer, i * dim * 4, dim * 4);
}

describe("image signature sniffing", () => {
  it("recognizes the supported container formats", () => {
    expect(sniffImageFormat(pngBytes("x"))).toBe("png");
    expect(sniffImageFormat(JPEG_MAGIC)).toBe("jpeg");
    expect(sniffImageFormat(Buffer.from("GIF89a123"))).toBe("gif");
    expect(sniffImageFormat(Buffer.from("BM1234"))).toBe("bmp");
    expect(sniffImageFormat(Buffer.concat([Buffer.from("RIFF1234"), Buffer.from("WEBP")]))).toBe("webp");
    expect(sniffImageFormat(Buffer.from("plain text"))).toBe(null);
    expect(sniffImageFormat(Buffer.alloc(0))).toBe(null);
  });
});

describe("extractImageFeatures", () => {
  it("encodes a two-image dataset into two unit-norm rows", () => {
    const dir = makeTempDir();
    makeSplit(join(dir, "data"), "train", {
      cat: { "one.png": pngBytes("one"), "two.png": pngBytes("two") },
    });
    const result = extractImageFeatures(jobFor(dir), encoder, () => {});
    expect(result.matrix.rows).toBe(2);
    expect(result.matrix.normalized).toBe(true);
    expect(result.identifiers).toEqual(["cat/one.png", "cat/two.png"]);
    expect(result.skipped).toEqual([]);

    const onDisk = readEmb1(result.outputs.embeddings);
    expect(Buffer.from(onDisk.data.buffer).equals(Buffer.from(result.matrix.data.buffer))).toBe(true);
    expect(readIndex(result.outputs.index)).toEqual(["cat/one.png", "cat/two.png"]);

    const manifest = JSON.parse(readFileSync(result.outputs.manifest, "utf-8"));
    expect(manifest).toEqual({
      backbone_tag: "ViT-B/32",
      class_names: ["cat"],
      dataset_name: "data",
      dim: 512,
      modality: "image",
      num_classes: 1,
      row_order: "class-major",
      shots: 0,
    });
  });

  it("gives identical rows to identical image bytes", () => {
    const dir = makeTempDir();
    makeSplit(join(dir, "data"), "train", {
      cat: { "a.png": pngBytes("same"), "b.png": pngBytes("same"), "c.png": pngBytes("diff") },
    });
    const { matrix } = extractImageFeatures(jobFor(dir), encoder, () => {});
    expect(rowBuffer(matrix.data, 512, 0).equals(rowBuffer(matrix.data, 512, 1))).toBe(true);
    expect(rowBuffer(matrix.data, 512, 0).equals(rowBuffer(matrix.data, 512, 2))).toBe(false);
  });

  it("orders rows class-major with classes and files sorted", () => {
    const dir = makeTempDir();
    makeSplit(join(dir, "data"), "train", {
      wolf: { "2.png": pngBytes("w2"), "1.png": pngBytes("w1") },
      ant: { "z.png": pngBytes("az") },
    });
    const result = extractImageFeatures(jobFor(dir), encoder, () => {});
    expect(result.classNames).toEqual(["ant", "wolf"]);
    expect(result.identifiers).toEqual(["ant/z.png", "wolf/1.png", "wolf/2.png"]);
  });

  it("skips unreadable images with a logged warning and a count", () => {
    const dir = makeTempDir();
    makeSplit(join(dir, "data"), "train", {
      cat: {
        "good.png": pngBytes("fine"),
        "broken.png": Buffer.from("this is not an image"),
      },
    });
    const logged: string[] = [];
    const result = extractImageFeatures(jobFor(dir), encoder, (m) => logged.push(m));
    expect(result.matrix.rows).toBe(1);
    expect(result.identifiers).toEqual(["cat/good.png"]);
    expect(result.skipped).toEqual([
      { identifier: "cat/broken.png", reason: "unrecognized image signature" },
    ]);
    expect(logged).toHaveLength(1);
    expect(logged[0]).toMatch(/skipping unreadable image cat\/broken\.png/);
  });

  it("ignores non-image file extensions silently", () => {
    const dir = makeTempDir();
    makeSplit(join(dir, "data"), "train", {
      cat: { "a.png": pngBytes("a"), "notes.txt": Buffer.from("notes") },
    });
    const logged: string[] = [];
    const result = extractImageFeatures(jobFor(dir), encoder, (m) => logged.push(m));
    expect(result.identifiers).toEqual(["cat/a.png"]);
    expect(logged).toEqual([]);
    expect(result.skipped).toEqual([]);
  });

  it("honors an explicit class list and rejects unknown names", () => {
    const dir = makeTempDir();
    makeSplit(join(dir, "data"), "train", {
      ant: { "a.png": pngBytes("a") },
      bee: { "b.png": pngBytes("b") },
      cat: { "c.png": pngBytes("c") },
    });
    const subset = extractImageFeatures(jobFor(dir, { class_names: ["cat", "ant"] }), encoder, () => {});
    expect(subset.classNames).toEqual(["cat", "ant"]);
    expect(subset.identifiers).toEqual(["cat/c.png", "ant/a.png"]);
    expect(() =>
      extractImageFeatures(jobFor(dir, { class_names: ["ant", "emu"] }), encoder, () => {}),
    ).toThrowError(/class "emu" has no directory/);
  });

  it("fails cleanly on missing splits, empty splits, and all-unreadable data", () => {
    const dir = makeTempDir();
    expect(() => extractImageFeatures(jobFor(dir), encoder, () => {})).toThrowError(InputError);

    mkdirSync(join(dir, "data", "train"), { recursive: true });
    expect(() => extractImageFeatures(jobFor(dir), encoder, () => {})).toThrowError(
      /no class subdirectories/,
    );

    writeFileSync(join(dir, "data", "train", ".keep"), "");
    mkdirSync(join(dir, "data", "train", "cat"));
    writeFileSync(join(dir, "data", "train", "cat", "bad.png"), "garbage");
    expect(() => extractImageFeatures(jobFor(dir), encoder, () => {})).toThrowError(
      /no readable images.*1 skipped/,
    );
  });
});
