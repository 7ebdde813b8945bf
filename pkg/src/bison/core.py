"""The scoped-pseudonym derivation pipeline.

A pseudonym is ``userId * AudienceId``: the service provider's audience
string is hashed to a group element, the user device blinds it with a fresh
scalar, the identity provider evaluates the blinded element with the user's
secret scalar, and the service provider removes the blind. Because the
blind cancels, the result is stable per (user, audience) while the identity
provider only ever sees uniformly distributed group elements.
"""

from __future__ import annotations

from dataclasses import dataclass

from .encoding import b64u_encode
from .group import Group, GroupElement, GroupScalar

__all__ = [
    "AudienceId",
    "Blind",
    "BlindedPair",
    "Pseudonym",
    "blind",
    "blind_eval",
    "unblind",
    "verify_blind",
    "derive_pseudonym_direct",
]


@dataclass(frozen=True)
class AudienceId:
    """An audience string together with the group element it hashes to.

    Always build via :meth:`from_audience`, which keeps the invariant
    ``element == hash_to_group(source_audience)`` by construction.
    """

    element: GroupElement
    source_audience: bytes

    @classmethod
    def from_audience(cls, group: Group, audience: str | bytes) -> "AudienceId":
        raw = audience.encode("utf-8") if isinstance(audience, str) else bytes(audience)
        return cls(element=group.hash_to_group(raw), source_audience=raw)


@dataclass(frozen=True)
class Blind:
    """A single-use blinding scalar. The agent discards it after one flow."""

    r: GroupScalar

    @classmethod
    def fresh(cls, group: Group, rng=None) -> "Blind":
        return cls(group.random_scalar(rng))


@dataclass(frozen=True)
class BlindedPair:
    """What the identity provider signs: the blinded audience and blinded pseudonym."""

    A: GroupElement
    B: GroupElement


@dataclass(frozen=True)
class Pseudonym:
    element: GroupElement

    @property
    def encoded(self) -> str:
        """Canonical transport form: unpadded base64url of the element encoding."""
        return b64u_encode(self.element.data)


def blind(aud: AudienceId, r: GroupScalar) -> GroupElement:
    """Blind the audience element with r, hiding it information-theoretically."""
    return aud.element.group.scalar_mult(r, aud.element)


def blind_eval(a: GroupElement, user_id: GroupScalar) -> GroupElement:
    """Server-side evaluation: multiply the blinded element by the user's secret."""
    return a.group.scalar_mult(user_id, a)


def unblind(b: GroupElement, r: GroupScalar) -> Pseudonym:
    """Strip the blind: multiply by r^-1, leaving userId * AudienceId."""
    group = b.group
    return Pseudonym(group.scalar_mult(group.scalar_invert(r), b))


def verify_blind(aud: AudienceId, claimed_r: GroupScalar, a: GroupElement) -> bool:
    """Check A = claimed_r * AudienceId by recomputing the blinding.

    Scalar-to-element multiplication by a fixed non-identity element is a
    bijection in a prime-order group, so success proves the claimed scalar
    is the one actually used; a doctored scalar would unblind to an
    attacker-chosen pseudonym.
    """
    return blind(aud, claimed_r) == a


def derive_pseudonym_direct(user_id: GroupScalar, aud: AudienceId) -> Pseudonym:
    """Reference derivation without blinding: userId * AudienceId.

    Nobody in the protocol can run this (no single party holds both inputs);
    it exists as the oracle for end-to-end tests and for the user-side
    self-check that a returned (A, B, r) tuple reproduces a remembered
    pseudonym.
    """
    return Pseudonym(aud.element.group.scalar_mult(user_id, aud.element))
