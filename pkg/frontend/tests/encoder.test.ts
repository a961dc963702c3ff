import { describe, expect, it } from "vitest";

import { BACKBONE_DIMS, backboneDim, hashEncoder, InputError } from "../dist/index.js";

function norm(row: Float32Array): number {
  let sum = 0;
  for (const v of row) {
    sum += v * v;
  }
  return Math.sqrt(sum);
}

function identical(a: Float32Array, b: Float32Array): boolean {
  return Buffer.from(a.buffer).equals(Buffer.from(b.buffer));
}

describe("backbone dimensions", () => {
  it("maps each supported tag to its embedding width", () => {
    expect(BACKBONE_DIMS).toEqual({
      "ResNet-50": 1024,
      "ResNet-101": 512,
      "ViT-B/32": 512,
      "ViT-B/16": 512,
    });
    expect(backboneDim("ResNet-50")).toBe(1024);
  });

  it("rejects unknown tags by name", () => {
    expect(() => backboneDim("ViT-L/14")).toThrowError(InputError);
    expect(() => backboneDim("ViT-L/14")).toThrowError(/ViT-L\/14/);
  });
});

describe("hash encoder", () => {
  const encoder = hashEncoder("ViT-B/32");

  it("produces rows of the backbone's dimension", () => {
    expect(encoder.dim).toBe(512);
    expect(encoder.encodeImage(Buffer.from("abc"))).toHaveLength(512);
    expect(hashEncoder("ResNet-50").encodeTokens(["a"])).toHaveLength(1024);
  });

  it("is deterministic for identical inputs", () => {
    const bytes = Buffer.from("the very same bytes");
    expect(identical(encoder.encodeImage(bytes), encoder.encodeImage(bytes))).toBe(true);
    expect(
      identical(encoder.encodeTokens(["a", "cat"]), encoder.encodeTokens(["a", "cat"])),
    ).toBe(true);
  });

  it("separates different inputs, modalities, and backbones", () => {
    const bytes = Buffer.from("content");
    expect(identical(encoder.encodeImage(bytes), encoder.encodeImage(Buffer.from("other")))).toBe(false);
    expect(identical(encoder.encodeTokens(["content"]), encoder.encodeImage(bytes))).toBe(false);
    const other = hashEncoder("ViT-B/16");
    expect(identical(encoder.encodeImage(bytes), other.encodeImage(bytes))).toBe(false);
  });

  it("does not collide on token boundaries", () => {
    expect(identical(encoder.encodeTokens(["ab", "c"]), encoder.encodeTokens(["a", "bc"]))).toBe(false);
  });

  it("emits unit-norm rows", () => {
    expect(norm(encoder.encodeImage(Buffer.from("x")))).toBeCloseTo(1.0, 6);
    expect(norm(encoder.encodeTokens(["many", "words", "here"]))).toBeCloseTo(1.0, 6);
  });
});
