import { describe, expect, it } from "vitest";

import { TOKEN_BUDGET, tokenize, truncateTokens } from "../dist/index.js";

describe("tokenize", () => {
  it("lowercases and splits words from punctuation", () => {
    expect(tokenize("A photo of a cat.")).toEqual(["a", "photo", "of", "a", "cat", "."]);
  });

  it("keeps numbers and treats punctuation marks individually", () => {
    expect(tokenize("route 66, now!")).toEqual(["route", "66", ",", "now", "!"]);
  });

  it("handles accented letters as word characters", () => {
    expect(tokenize("Crème brûlée")).toEqual(["crème", "brûlée"]);
  });

  it("returns no tokens for empty or whitespace input", () => {
    expect(tokenize("")).toEqual([]);
    expect(tokenize("   \n\t")).toEqual([]);
  });
});

describe("truncateTokens", () => {
  it("leaves sequences at or under the budget untouched", () => {
    const tokens = Array.from({ length: TOKEN_BUDGET }, (_, i) => `t${i}`);
    const result = truncateTokens(tokens);
    expect(result.truncated).toBe(false);
    expect(result.tokens).toHaveLength(TOKEN_BUDGET);
    expect(result.tokens).toBe(tokens);
  });

  it("clips one-over-budget sequences and reports it", () => {
    const tokens = Array.from({ length: TOKEN_BUDGET + 1 }, (_, i) => `t${i}`);
    const result = truncateTokens(tokens);
    expect(result.truncated).toBe(true);
    expect(result.tokens).toHaveLength(TOKEN_BUDGET);
    expect(result.tokens[TOKEN_BUDGET - 1]).toBe(`t${TOKEN_BUDGET - 1}`);
  });

  it("honors a custom budget", () => {
    const result = truncateTokens(["a", "b", "c"], 2);
    expect(result.tokens).toEqual(["a", "b"]);
    expect(result.truncated).toBe(true);
  });
});
