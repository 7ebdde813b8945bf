"""Shared helpers: find test-group preimages with chosen images by scanning."""

from bison.core import AudienceId


def aud_for_element(tg, value):
    """An AudienceId whose element is the given residue, found by scanning inputs."""
    i = 0
    while True:
        candidate = b"aud-%d" % i
        if tg.element_value(tg.hash_to_group(candidate)) == value:
            return AudienceId.from_audience(tg, candidate)
        i += 1


def all_audiences(tg):
    """One AudienceId per non-identity element."""
    found = {}
    i = 0
    while len(found) < 10:
        candidate = b"probe-%d" % i
        value = tg.element_value(tg.hash_to_group(candidate))
        found.setdefault(value, AudienceId.from_audience(tg, candidate))
        i += 1
    return [found[v] for v in sorted(found)]


def seed_for_user_id(tg, value, length=32):
    """A 32-byte seed whose derived secret scalar equals ``value``."""
    i = 0
    while True:
        seed = (b"seed-%d" % i).ljust(length, b".")
        if tg.hash_to_scalar(seed).value == value:
            return seed
        i += 1
