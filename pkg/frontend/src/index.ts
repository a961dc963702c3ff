export { ExtractError, FormatError, InputError, MissingKeyError } from "./errors.js";
export {
  FORMAT_VERSION,
  HEADER_SIZE,
  MAGIC,
  UNIT_NORM_TOL,
  ZERO_ROW_EPS,
  atomicWriteFile,
  l2NormalizeRows,
  matrixFromRows,
  readEmb1,
  writeEmb1,
  type EmbeddingMatrix,
} from "./emb1.js";
export {
  MODALITIES,
  ROW_ORDER_CLASS_MAJOR,
  canonicalJson,
  manifestToJson,
  validateManifest,
  writeManifest,
  type Manifest,
  type Modality,
} from "./manifest.js";
export { TOKEN_BUDGET, tokenize, truncateTokens, type TruncationResult } from "./tokenize.js";
export {
  BACKBONE_DIMS,
  BACKBONE_TAGS,
  backboneDim,
  hashEncoder,
  type Encoder,
} from "./encoder.js";
export { jobFromDict, loadJob, type ExtractionJob } from "./job.js";
export {
  captionOutputs,
  imageOutputs,
  prototypeOutputs,
  readIndex,
  writeIndex,
  type OutputTriple,
} from "./outputs.js";
export {
  extractImageFeatures,
  resolveClassNames,
  sniffImageFormat,
  type ImageExtractionResult,
  type SkippedFile,
} from "./images.js";
export {
  encodeClassPrototypes,
  extractClassPrototypes,
  instantiateTemplate,
  type PrototypeExtractionResult,
} from "./prototypes.js";
export {
  encodeCaptions,
  extractCaptionFeatures,
  loadCaptions,
  type CaptionEncodingResult,
  type CaptionExtractionResult,
} from "./captions.js";
