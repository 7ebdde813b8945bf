/** Origin canonicalization, matching the service side byte for byte. */

const DEFAULT_PORTS: Record<string, string> = { 'http:': '80', 'https:': '443' };

export function canonicalOrigin(origin: string): string {
  const url = new URL(origin.includes('//') ? origin : `https://${origin}`);
  const scheme = url.protocol.toLowerCase();
  const host = url.hostname.toLowerCase();
  if (!host) throw new Error(`not an origin: ${origin}`);
  const port = url.port;
  if (!port || port === DEFAULT_PORTS[scheme]) return `${scheme}//${host}`;
  return `${scheme}//${host}:${port}`;
}

export function isLoopbackHost(host: string): boolean {
  const h = host.toLowerCase();
  return h === 'localhost' || h.endsWith('.localhost') || h === '[::1]' || h === '::1'
    || h.startsWith('127.');
}

export function isSecureOrigin(origin: string): boolean {
  const url = new URL(canonicalOrigin(origin));
  return url.protocol === 'https:' || isLoopbackHost(url.hostname);
}

export function originHost(origin: string): string {
  return new URL(canonicalOrigin(origin)).hostname.toLowerCase();
}
