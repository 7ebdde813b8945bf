/**
 * ristretto255 group operations for the in-browser agent.
 *
 * Must stay bit-compatible with the server-side implementation: elements
 * use the canonical 32-byte encoding, scalars 32-byte little-endian, and
 * hash-to-group is the one-way map applied to a SHA-512 digest (the
 * RFC 9496 derivation vectors pin this construction).
 */

import { ristretto255, ristretto255_hasher } from '@noble/curves/ed25519.js';
import { sha512 } from '@noble/hashes/sha2.js';

import { b64uDecode, b64uEncode } from './b64.js';

const Point = ristretto255.Point;
type RistrettoPoint = InstanceType<typeof Point>;

/** Prime order of the ristretto255 group. */
export const GROUP_ORDER = 2n ** 252n + 27742317777372353535851937790883648493n;

const IDENTITY_HEX = '00'.repeat(32);

function toHex(data: Uint8Array): string {
  return [...data].map((b) => b.toString(16).padStart(2, '0')).join('');
}

function oneWayMap(digest: Uint8Array): RistrettoPoint {
  const derive = ristretto255_hasher.deriveToCurve;
  if (derive === undefined) {
    throw new Error('ristretto255 one-way map unavailable in this @noble/curves build');
  }
  return derive(digest) as RistrettoPoint;
}

export function hashToGroup(input: Uint8Array): RistrettoPoint {
  // Identity output has probability ~2^-252; the loop keeps the map total.
  let message = input;
  let counter = 0;
  for (;;) {
    const point = oneWayMap(sha512(message));
    if (toHex(point.toBytes()) !== IDENTITY_HEX) return point;
    counter += 1;
    message = new Uint8Array([...input, counter]);
  }
}

export function randomScalar(): bigint {
  // 64 uniform bytes reduced mod the order leaves negligible bias; zero is
  // rejection-sampled away.
  const buffer = new Uint8Array(64);
  crypto.getRandomValues(buffer.subarray(0, 32));
  crypto.getRandomValues(buffer.subarray(32));
  let value = 0n;
  for (let i = buffer.length - 1; i >= 0; i--) value = (value << 8n) | BigInt(buffer[i]);
  value %= GROUP_ORDER;
  return value === 0n ? randomScalar() : value;
}

export function scalarMult(scalar: bigint, point: RistrettoPoint): RistrettoPoint {
  if (scalar <= 0n || scalar >= GROUP_ORDER) throw new Error('scalar out of range');
  return point.multiply(scalar);
}

export function scalarInvert(scalar: bigint): bigint {
  // extended Euclid; the order is prime so every nonzero scalar inverts
  let [t, newT] = [0n, 1n];
  let [r, newR] = [GROUP_ORDER, ((scalar % GROUP_ORDER) + GROUP_ORDER) % GROUP_ORDER];
  while (newR !== 0n) {
    const q = r / newR;
    [t, newT] = [newT, t - q * newT];
    [r, newR] = [newR, r - q * newR];
  }
  if (r !== 1n) throw new Error('scalar is not invertible');
  return ((t % GROUP_ORDER) + GROUP_ORDER) % GROUP_ORDER;
}

export function encodeElement(point: RistrettoPoint): Uint8Array {
  return point.toBytes();
}

export function decodeElement(data: Uint8Array): RistrettoPoint {
  if (data.length !== 32) throw new Error('element encoding must be 32 bytes');
  if (toHex(data) === IDENTITY_HEX) throw new Error('identity element rejected');
  return Point.fromBytes(data); // throws on non-canonical encodings
}

export function encodeScalar(scalar: bigint): Uint8Array {
  if (scalar <= 0n || scalar >= GROUP_ORDER) throw new Error('scalar out of range');
  const out = new Uint8Array(32);
  let value = scalar;
  for (let i = 0; i < 32; i++) {
    out[i] = Number(value & 0xffn);
    value >>= 8n;
  }
  return out;
}

export function decodeScalar(data: Uint8Array): bigint {
  if (data.length !== 32) throw new Error('scalar encoding must be 32 bytes');
  let value = 0n;
  for (let i = 31; i >= 0; i--) value = (value << 8n) | BigInt(data[i]);
  if (value === 0n) throw new Error('zero scalar rejected');
  if (value >= GROUP_ORDER) throw new Error('scalar encoding is not canonical');
  return value;
}

export const elementToB64 = (point: RistrettoPoint): string => b64uEncode(encodeElement(point));
export const elementFromB64 = (text: string): RistrettoPoint => decodeElement(b64uDecode(text));
export const scalarToB64 = (scalar: bigint): string => b64uEncode(encodeScalar(scalar));
export const scalarFromB64 = (text: string): bigint => decodeScalar(b64uDecode(text));

export type { RistrettoPoint };
