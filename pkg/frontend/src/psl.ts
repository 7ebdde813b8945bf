/**
 * Registrable-domain matching for audience authorization.
 *
 * The snapshot mirrors src/bison/data/public_suffix_snapshot.dat in the
 * server package; regenerate both together when refreshing the list.
 */

const SNAPSHOT = `
com
net
org
edu
gov
mil
int
info
biz
name
io
co
me
tv
cc
dev
app
xyz
ac.uk
co.uk
gov.uk
org.uk
uk
de
fr
nl
be
at
ch
it
es
pl
se
no
fi
dk
eu
us
ca
com.au
net.au
org.au
au
co.jp
or.jp
ne.jp
jp
com.cn
net.cn
org.cn
cn
co.in
in
com.br
br
co.nz
net.nz
org.nz
nz
ru
*.ck
!www.ck
github.io
gitlab.io
pages.dev
netlify.app
herokuapp.com
appspot.com
blogspot.com
s3.amazonaws.com
`;

const plain = new Set<string>();
const wildcard = new Set<string>();
const exceptions = new Set<string>();
for (const line of SNAPSHOT.split('\n')) {
  const rule = line.trim().toLowerCase();
  if (!rule || rule.startsWith('//')) continue;
  if (rule.startsWith('!')) exceptions.add(rule.slice(1));
  else if (rule.startsWith('*.')) wildcard.add(rule.slice(2));
  else plain.add(rule);
}

function looksLikeIp(host: string): boolean {
  if (host.startsWith('[') || host.includes(':')) return true;
  const labels = host.split('.');
  return labels.length === 4 && labels.every((l) => /^\d+$/.test(l));
}

export function publicSuffix(host: string): string {
  const labels = host.toLowerCase().replace(/\.$/, '').split('.');
  let matchLength = 1; // implicit "*" rule
  for (let start = 0; start < labels.length; start++) {
    const candidate = labels.slice(start).join('.');
    const size = labels.length - start;
    if (exceptions.has(candidate)) {
      if (size - 1 > matchLength) matchLength = size - 1;
      break;
    }
    if (plain.has(candidate) && size > matchLength) matchLength = size;
    const parent = labels.slice(start + 1).join('.');
    if (parent && wildcard.has(parent) && size > matchLength) matchLength = size;
  }
  return labels.slice(labels.length - matchLength).join('.');
}

export function isPublicSuffix(host: string): boolean {
  const h = host.toLowerCase().replace(/\.$/, '');
  return h.length > 0 && publicSuffix(h) === h;
}

/** True iff suffix equals host or is a registrable domain suffix of it. */
export function isRegistrableSuffixOf(suffix: string, host: string): boolean {
  const s = suffix.toLowerCase().replace(/\.$/, '');
  const h = host.toLowerCase().replace(/\.$/, '');
  if (!s || !h) return false;
  if (s === h) return true;
  if (looksLikeIp(s) || looksLikeIp(h)) return false;
  if (!h.endsWith('.' + s)) return false;
  return !isPublicSuffix(s);
}
