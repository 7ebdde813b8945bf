/** Unpadded base64url over Uint8Array, usable in both browser and Node. */

const ALPHABET = 'ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_';
const REVERSE: Record<string, number> = {};
for (let i = 0; i < ALPHABET.length; i++) REVERSE[ALPHABET[i]] = i;

export function b64uEncode(data: Uint8Array): string {
  let out = '';
  for (let i = 0; i < data.length; i += 3) {
    const a = data[i];
    const b = i + 1 < data.length ? data[i + 1] : undefined;
    const c = i + 2 < data.length ? data[i + 2] : undefined;
    out += ALPHABET[a >> 2];
    out += ALPHABET[((a & 0x03) << 4) | (b === undefined ? 0 : b >> 4)];
    if (b !== undefined) out += ALPHABET[((b & 0x0f) << 2) | (c === undefined ? 0 : c >> 6)];
    if (c !== undefined) out += ALPHABET[c & 0x3f];
  }
  return out;
}

export function b64uDecode(text: string): Uint8Array {
  if (/[^A-Za-z0-9\-_]/.test(text)) throw new Error('invalid base64url');
  const rem = text.length % 4;
  if (rem === 1) throw new Error('invalid base64url length');
  const outLength = Math.floor((text.length * 3) / 4);
  const out = new Uint8Array(outLength);
  let o = 0;
  for (let i = 0; i < text.length; i += 4) {
    const chunk = text.slice(i, i + 4);
    const values = [...chunk].map((ch) => REVERSE[ch]);
    out[o++] = (values[0] << 2) | (values[1] >> 4);
    if (chunk.length > 2) out[o++] = ((values[1] & 0x0f) << 4) | (values[2] >> 2);
    if (chunk.length > 3) out[o++] = ((values[2] & 0x03) << 6) | values[3];
  }
  return out;
}

export function utf8(text: string): Uint8Array {
  return new TextEncoder().encode(text);
}

export function concat(...parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const part of parts) {
    out.set(part, offset);
    offset += part.length;
  }
  return out;
}
