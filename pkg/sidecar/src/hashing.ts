/**
 * Deterministic hashing bag-of-tokens embedder.
 *
 * This is the sidecar's test mode: it must reproduce the core engine's
 * builtin provider bit for bit on ASCII input. Tokens are ASCII-lowercased
 * alphanumeric runs; each token lands in a bucket chosen by one 32-bit
 * FNV-1a hash and contributes a +/-1 sign chosen by a second. Counts are
 * exact integers, so the L2 normalization is reproducible across languages.
 *
 * The three constants are frozen; they must match the core engine exactly.
 */

export const FNV_PRIME = 0x01000193;
export const BUCKET_SEED = 0x811c9dc5;
export const SIGN_SEED = 0x7a3e5c91;

const TOKEN_RE = /[a-z0-9]+/g;

export class EmptyContentError extends Error {
  readonly code = "EmptyContent";
}

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}

function fnv1a(bytes: Uint8Array, seed: number): number {
  let h = seed >>> 0;
  for (const b of bytes) {
    h = Math.imul(h ^ b, FNV_PRIME) >>> 0;
  }
  return h;
}

const encoder = new TextEncoder();

export function hashEmbed(text: string, dim: number): Float64Array {
  if (text.trim().length === 0) {
    throw new EmptyContentError("cannot embed empty text");
  }
  const tokens = tokenize(text);
  if (tokens.length === 0) {
    throw new EmptyContentError("text has no alphanumeric tokens");
  }
  const vec = new Float64Array(dim);
  for (const token of tokens) {
    const raw = encoder.encode(token);
    const bucket = fnv1a(raw, BUCKET_SEED) % dim;
    const sign = (fnv1a(raw, SIGN_SEED) & 1) === 1 ? 1.0 : -1.0;
    vec[bucket] += sign;
  }
  let squares = 0;
  for (const x of vec) {
    squares += x * x; // integer squares: exact, order-independent
  }
  const norm = Math.sqrt(squares);
  for (let i = 0; i < dim; i++) {
    vec[i] = vec[i] / norm;
  }
  return vec;
}
