"""Blind identification with stateless scoped pseudonyms.

A pseudonym derivation protocol in which the identity provider evaluates a
blinded audience identifier, so it authenticates the user without learning
where the user is logging in, while every service in an audience scope sees
one stable, unlinkable pseudonym per account. This package bundles the
derivation library, mock identity/service providers speaking an OpenID
Connect extension, a protocol-aware headless user agent, and a harness that
replays the protocol's attack scenarios and performance claims.
"""

from .core import (
    AudienceId,
    Blind,
    BlindedPair,
    Pseudonym,
    blind,
    blind_eval,
    derive_pseudonym_direct,
    unblind,
    verify_blind,
)
from .group import (
    GroupDescriptor,
    GroupElement,
    GroupScalar,
    OpCounter,
    Ristretto255Group,
    TestGroup,
    count_ops,
    get_group,
)

__version__ = "0.1.0"

__all__ = [
    "AudienceId",
    "Blind",
    "BlindedPair",
    "Pseudonym",
    "blind",
    "blind_eval",
    "derive_pseudonym_direct",
    "unblind",
    "verify_blind",
    "GroupDescriptor",
    "GroupElement",
    "GroupScalar",
    "OpCounter",
    "Ristretto255Group",
    "TestGroup",
    "count_ops",
    "get_group",
    "__version__",
]
