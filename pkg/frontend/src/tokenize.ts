/**
 * Text tokenization with the encoder's fixed token budget.
 *
 * The tokenizer is deliberately simple — lowercase words and individual
 * punctuation marks — because the bundled encoder is a deterministic stub;
 * a real encoder plugs in its own vocabulary but keeps the same budget.
 */

/** Hard cap on tokens per text; anything longer is truncated, never rejected. */
export const TOKEN_BUDGET = 77;

/** Lowercase word/punctuation split. "A photo of a cat." -> [a, photo, of, a, cat, .] */
export function tokenize(text: string): string[] {
  return text.toLowerCase().match(/[\p{L}\p{N}]+|[^\s\p{L}\p{N}]/gu) ?? [];
}

export interface TruncationResult {
  tokens: string[];
  truncated: boolean;
}

/** Clip a token sequence to the budget, reporting whether clipping happened. */
export function truncateTokens(tokens: string[], budget: number = TOKEN_BUDGET): TruncationResult {
  if (tokens.length <= budget) {
    return { tokens, truncated: false };
  }
  return { tokens: tokens.slice(0, budget), truncated: true };
}
