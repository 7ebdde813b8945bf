"""Registrable-domain matching against a bundled public suffix snapshot.

The user agent only blinds an audience that the current page origin is
authorized for: the audience must equal the origin's host or be a
registrable domain suffix of it. ``login.example.com`` may use the
``example.com`` audience, but not ``com`` (nobody registers ``com``).
This mirrors the relying-party identifier rule of Web Authentication.

The snapshot shipped in ``data/public_suffix_snapshot.dat`` is a trimmed,
versioned extract of the publicsuffix.org list; tests can layer extra rules
on top through an override file.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

__all__ = ["PublicSuffixList", "is_registrable_suffix_of"]

_SNAPSHOT_RESOURCE = "public_suffix_snapshot.dat"


def _parse_rules(lines: Iterable[str]) -> tuple[set[str], set[str], set[str]]:
    plain: set[str] = set()
    wildcard: set[str] = set()
    exceptions: set[str] = set()
    for line in lines:
        rule = line.strip()
        if not rule or rule.startswith("//"):
            continue
        rule = rule.split()[0].lower()
        if rule.startswith("!"):
            exceptions.add(rule[1:])
        elif rule.startswith("*."):
            wildcard.add(rule[2:])
        else:
            plain.add(rule)
    return plain, wildcard, exceptions


def _looks_like_ip(host: str) -> bool:
    if host.startswith("[") or ":" in host:
        return True
    labels = host.split(".")
    return len(labels) == 4 and all(label.isdigit() for label in labels)


class PublicSuffixList:
    def __init__(self, rules: Iterable[str]):
        self._plain, self._wildcard, self._exceptions = _parse_rules(rules)

    @classmethod
    def bundled(cls, override_path: Optional[str | Path] = None) -> "PublicSuffixList":
        text = resources.files("bison.data").joinpath(_SNAPSHOT_RESOURCE).read_text("utf-8")
        lines = text.splitlines()
        if override_path is not None:
            lines += Path(override_path).read_text("utf-8").splitlines()
        return cls(lines)

    def public_suffix(self, host: str) -> str:
        """Longest matching public suffix of the host, per the standard algorithm.

        An unlisted top-level label counts as a public suffix (the implicit
        ``*`` rule), so unknown TLDs still behave sanely.
        """
        labels = host.lower().rstrip(".").split(".")
        match_len = 1  # implicit "*" rule
        for start in range(len(labels)):
            candidate = ".".join(labels[start:])
            size = len(labels) - start
            if candidate in self._exceptions:
                if size - 1 > match_len:
                    match_len = size - 1
                break
            if candidate in self._plain and size > match_len:
                match_len = size
            parent = ".".join(labels[start + 1:])
            if parent and parent in self._wildcard and size > match_len:
                match_len = size
        return ".".join(labels[-match_len:])

    def is_public_suffix(self, host: str) -> bool:
        host = host.lower().rstrip(".")
        return bool(host) and self.public_suffix(host) == host

    def registrable_domain(self, host: str) -> Optional[str]:
        """The public suffix plus one label, or None if the host is itself one."""
        host = host.lower().rstrip(".")
        if _looks_like_ip(host):
            return None
        suffix = self.public_suffix(host)
        if suffix == host:
            return None
        labels = host.split(".")
        suffix_len = len(suffix.split("."))
        return ".".join(labels[-(suffix_len + 1):])


def is_registrable_suffix_of(suffix: str, host: str, psl: PublicSuffixList) -> bool:
    """True iff ``suffix`` equals ``host`` or is a registrable domain suffix of it.

    Exact equality always passes (an IP-literal origin can use itself as the
    audience). A proper suffix must sit on a label boundary and must not be
    a public suffix: sharing an audience across everything under ``com``
    would collapse the scoping.
    """
    suffix = suffix.lower().rstrip(".")
    host = host.lower().rstrip(".")
    if not suffix or not host:
        return False
    if suffix == host:
        return True
    if _looks_like_ip(host) or _looks_like_ip(suffix):
        return False
    if not host.endswith("." + suffix):
        return False
    return not psl.is_public_suffix(suffix)
