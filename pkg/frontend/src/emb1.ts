/**
 * The EMB1 binary container for embedding matrices.
 *
 * Layout (little-endian): 4-byte magic "EMB1", u32 format version, u64 row
 * count, u64 dimension, u8 normalized flag, 7 reserved zero bytes — a 32-byte
 * header — followed by the rows as float32, row-major, exactly
 * rows*dim*4 bytes. Files round-trip bit-exactly and are written atomically
 * (temp sibling + rename) so readers never observe partial output.
 */
import { mkdirSync, readFileSync, renameSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { FormatError, InputError } from "./errors.js";

export const MAGIC = "EMB1";
export const FORMAT_VERSION = 1;
export const HEADER_SIZE = 32;

const OFFSET_MAGIC = 0;
const OFFSET_VERSION = 4;
const OFFSET_ROWS = 8;
const OFFSET_DIM = 16;
const OFFSET_NORMALIZED = 24;
const OFFSET_RESERVED = 25;

/** Declared-normalized rows must be this close to unit L2 norm. */
export const UNIT_NORM_TOL = 1e-4;
/** Rows at or below this norm cannot be normalized. */
export const ZERO_ROW_EPS = 1e-12;

export interface EmbeddingMatrix {
  /** Row-major float32 data of length rows*dim. */
  data: Float32Array;
  rows: number;
  dim: number;
  /** Declares that every row has unit L2 norm (checked on write and read). */
  normalized: boolean;
}

export function matrixFromRows(rows: Float32Array[], normalized: boolean): EmbeddingMatrix {
  if (rows.length === 0) {
    throw new InputError("an embedding matrix needs at least one row");
  }
  const first = rows[0]!;
  const dim = first.length;
  if (dim === 0) {
    throw new InputError("an embedding matrix needs at least one column");
  }
  const data = new Float32Array(rows.length * dim);
  rows.forEach((row, i) => {
    if (row.length !== dim) {
      throw new InputError(`row ${i} has length ${row.length}, expected ${dim}`);
    }
    data.set(row, i * dim);
  });
  return { data, rows: rows.length, dim, normalized };
}

function rowNorm(data: Float32Array, row: number, dim: number): number {
  let sum = 0;
  for (let j = row * dim; j < (row + 1) * dim; j++) {
    const v = data[j]!;
    sum += v * v;
  }
  return Math.sqrt(sum);
}

function checkMatrix(matrix: EmbeddingMatrix): void {
  const { data, rows, dim, normalized } = matrix;
  if (rows < 1 || dim < 1) {
    throw new InputError(`embedding matrix must be at least 1x1, got ${rows}x${dim}`);
  }
  if (data.length !== rows * dim) {
    throw new InputError(`data length ${data.length} does not match ${rows}x${dim}`);
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i]!)) {
      throw new InputError(`non-finite value at row ${Math.floor(i / dim)}, column ${i % dim}`);
    }
  }
  if (normalized) {
    for (let r = 0; r < rows; r++) {
      const norm = rowNorm(data, r, dim);
      if (Math.abs(norm - 1.0) > UNIT_NORM_TOL) {
        throw new InputError(
          `matrix declared normalized but row ${r} has norm ${norm.toFixed(6)}`,
        );
      }
    }
  }
}

/** Scale every row to unit L2 norm; rejects rows with norm <= 1e-12. */
export function l2NormalizeRows(matrix: EmbeddingMatrix): EmbeddingMatrix {
  const { data, rows, dim } = matrix;
  const out = new Float32Array(data.length);
  for (let r = 0; r < rows; r++) {
    const norm = rowNorm(data, r, dim);
    if (norm <= ZERO_ROW_EPS) {
      throw new InputError(`row ${r} has norm ${norm} and cannot be normalized`);
    }
    for (let j = 0; j < dim; j++) {
      out[r * dim + j] = data[r * dim + j]! / norm;
    }
  }
  return { data: out, rows, dim, normalized: true };
}

/** Write bytes to a sibling temp file, then rename into place. */
export function atomicWriteFile(path: string, payload: Buffer | string): void {
  mkdirSync(dirname(path), { recursive: true });
  const tmp = `${path}.tmp`;
  writeFileSync(tmp, payload);
  renameSync(tmp, path);
}

export function writeEmb1(matrix: EmbeddingMatrix, path: string): void {
  checkMatrix(matrix);
  const header = Buffer.alloc(HEADER_SIZE);
  header.write(MAGIC, OFFSET_MAGIC, "ascii");
  header.writeUInt32LE(FORMAT_VERSION, OFFSET_VERSION);
  header.writeBigUInt64LE(BigInt(matrix.rows), OFFSET_ROWS);
  header.writeBigUInt64LE(BigInt(matrix.dim), OFFSET_DIM);
  header.writeUInt8(matrix.normalized ? 1 : 0, OFFSET_NORMALIZED);
  const payload = Buffer.alloc(matrix.data.length * 4);
  for (let i = 0; i < matrix.data.length; i++) {
    payload.writeFloatLE(matrix.data[i]!, i * 4);
  }
  atomicWriteFile(path, Buffer.concat([header, payload]));
}

export function readEmb1(path: string): EmbeddingMatrix {
  const raw = readFileSync(path);
  if (raw.length < HEADER_SIZE) {
    throw new FormatError(path, raw.length, `truncated header, need ${HEADER_SIZE} bytes, file has ${raw.length}`);
  }
  const magic = raw.subarray(0, 4).toString("ascii");
  if (magic !== MAGIC) {
    throw new FormatError(path, OFFSET_MAGIC, `bad magic ${JSON.stringify(magic)}, expected ${JSON.stringify(MAGIC)}`);
  }
  const version = raw.readUInt32LE(OFFSET_VERSION);
  if (version !== FORMAT_VERSION) {
    throw new FormatError(path, OFFSET_VERSION, `unsupported format version ${version}`);
  }
  const rowsBig = raw.readBigUInt64LE(OFFSET_ROWS);
  const dimBig = raw.readBigUInt64LE(OFFSET_DIM);
  if (rowsBig === 0n) {
    throw new FormatError(path, OFFSET_ROWS, "row count must be at least 1");
  }
  if (dimBig === 0n) {
    throw new FormatError(path, OFFSET_DIM, "dimension must be at least 1");
  }
  if (rowsBig > BigInt(Number.MAX_SAFE_INTEGER) || dimBig > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new FormatError(path, OFFSET_ROWS, "row count or dimension too large");
  }
  const rows = Number(rowsBig);
  const dim = Number(dimBig);
  const normFlag = raw.readUInt8(OFFSET_NORMALIZED);
  if (normFlag !== 0 && normFlag !== 1) {
    throw new FormatError(path, OFFSET_NORMALIZED, `normalized flag must be 0 or 1, got ${normFlag}`);
  }
  for (let i = OFFSET_RESERVED; i < HEADER_SIZE; i++) {
    if (raw[i] !== 0) {
      throw new FormatError(path, OFFSET_RESERVED, "reserved header bytes must be zero");
    }
  }
  const expected = rows * dim * 4;
  const payloadLength = raw.length - HEADER_SIZE;
  if (payloadLength < expected) {
    throw new FormatError(
      path,
      HEADER_SIZE + payloadLength,
      `truncated payload, expected ${expected} bytes after the header, got ${payloadLength}`,
    );
  }
  if (payloadLength > expected) {
    throw new FormatError(
      path,
      HEADER_SIZE + expected,
      `trailing data, expected exactly ${expected} payload bytes, got ${payloadLength}`,
    );
  }
  const data = new Float32Array(rows * dim);
  for (let i = 0; i < data.length; i++) {
    const v = raw.readFloatLE(HEADER_SIZE + i * 4);
    if (!Number.isFinite(v)) {
      throw new FormatError(path, HEADER_SIZE + i * 4, `non-finite value at element ${i}`);
    }
    data[i] = v;
  }
  const matrix: EmbeddingMatrix = { data, rows, dim, normalized: normFlag === 1 };
  if (matrix.normalized) {
    for (let r = 0; r < rows; r++) {
      const norm = rowNorm(data, r, dim);
      if (Math.abs(norm - 1.0) > UNIT_NORM_TOL) {
        throw new FormatError(path, HEADER_SIZE + r * dim * 4, `row ${r} declared normalized but has norm ${norm.toFixed(6)}`);
      }
    }
  }
  return matrix;
}
