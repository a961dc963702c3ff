/** Base class for every failure the CLI reports as a clean one-line error. */
export class ExtractError extends Error {}

/** Bad user input: job file, paths, class names, templates. */
export class InputError extends ExtractError {}

/** A cache image has no caption under its identifier. */
export class MissingKeyError extends ExtractError {}

/** A binary embedding file violates the EMB1 layout. Names the byte offset. */
export class FormatError extends ExtractError {
  readonly path: string;
  readonly offset: number;

  constructor(path: string, offset: number, detail: string) {
    super(`${path}: ${detail} (byte offset ${offset})`);
    this.path = path;
    this.offset = offset;
  }
}
