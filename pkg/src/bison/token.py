"""Signed ID tokens carrying the blinded pair.

The token is a compact JWS-style string: three unpadded base64url segments
joined by dots, the signature computed over the first two. Claims are
serialized with sorted keys and no insignificant whitespace so a claim set
has exactly one encoding. In blinded mode the ``aud`` claim is the blinded
audience element and ``sub`` the blinded pseudonym; signing them jointly is
what stops an attacker from transplanting one half into another token.

The signature scheme is a configuration point with one default, Ed25519
(deterministic, and native to the same curve family as the production
group). The identity provider in the original demonstrator used an
ephemeral ECDSA P-256 pair; any scheme with the same small surface slots in.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric import ed25519

from .encoding import EncodingError, b64u_decode, b64u_encode
from .group import DecodeError, Group, record_hash_eval

__all__ = [
    "BISON_SUBJECT_TYPE",
    "IdTokenClaims",
    "SignedIdToken",
    "Ed25519Scheme",
    "VerificationKey",
    "issue_token",
    "verify_token",
    "TokenError",
    "MalformedToken",
    "BadSignature",
    "Expired",
    "WrongIssuer",
    "IssuanceError",
]

BISON_SUBJECT_TYPE = "bison"

_CLAIM_KEYS = ("aud", "exp", "iat", "iss", "nonce", "pairwise_subject_type", "sub")


class TokenError(Exception):
    """Base class for token issuance and validation failures."""


class MalformedToken(TokenError):
    """Structurally invalid token or claim set (includes group-invariant violations)."""


class BadSignature(TokenError):
    """Signature does not verify under the trusted key."""


class Expired(TokenError):
    """Token lifetime constraints violated at the evaluation time."""


class WrongIssuer(TokenError):
    """iss claim does not match the expected issuer."""


class IssuanceError(TokenError):
    """Token could not be serialized or signed."""


@dataclass(frozen=True)
class IdTokenClaims:
    iss: str
    aud: str
    sub: str
    nonce: str
    iat: int
    exp: int
    pairwise_subject_type: Optional[str] = None

    def validate(self, group: Optional[Group] = None) -> None:
        if self.exp <= self.iat:
            raise MalformedToken("exp must be after iat")
        if self.pairwise_subject_type == BISON_SUBJECT_TYPE:
            if group is None:
                raise MalformedToken("blinded-mode token but no group configured for validation")
            try:
                group.element_from_b64(self.aud)
                group.element_from_b64(self.sub)
            except (DecodeError, EncodingError) as exc:
                raise MalformedToken(f"aud/sub must decode to group elements: {exc}") from exc

    def to_json_bytes(self) -> bytes:
        payload = {
            "iss": self.iss,
            "aud": self.aud,
            "sub": self.sub,
            "nonce": self.nonce,
            "iat": self.iat,
            "exp": self.exp,
        }
        if self.pairwise_subject_type is not None:
            payload["pairwise_subject_type"] = self.pairwise_subject_type
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("ascii")

    @classmethod
    def from_mapping(cls, payload: dict) -> "IdTokenClaims":
        if not isinstance(payload, dict):
            raise MalformedToken("claims payload is not an object")
        unknown = set(payload) - set(_CLAIM_KEYS)
        if unknown:
            raise MalformedToken(f"unknown claims: {sorted(unknown)}")
        try:
            claims = cls(
                iss=payload["iss"],
                aud=payload["aud"],
                sub=payload["sub"],
                nonce=payload["nonce"],
                iat=payload["iat"],
                exp=payload["exp"],
                pairwise_subject_type=payload.get("pairwise_subject_type"),
            )
        except KeyError as exc:
            raise MalformedToken(f"missing claim: {exc.args[0]}") from exc
        for name in ("iss", "aud", "sub", "nonce"):
            if not isinstance(getattr(claims, name), str):
                raise MalformedToken(f"claim {name} must be a string")
        for name in ("iat", "exp"):
            if not isinstance(getattr(claims, name), int) or isinstance(getattr(claims, name), bool):
                raise MalformedToken(f"claim {name} must be an integer")
        if claims.pairwise_subject_type is not None and not isinstance(claims.pairwise_subject_type, str):
            raise MalformedToken("claim pairwise_subject_type must be a string")
        return claims


class VerificationKey:
    """Public half of the token signing key, as served via discovery."""

    def __init__(self, raw_public: bytes, kid: str):
        self._key = ed25519.Ed25519PublicKey.from_public_bytes(raw_public)
        self.raw = raw_public
        self.kid = kid
        self.algorithm = "EdDSA"

    def verify(self, signature: bytes, message: bytes) -> bool:
        try:
            self._key.verify(signature, message)
            return True
        except InvalidSignature:
            return False

    def to_jwk(self) -> dict:
        return {
            "kty": "OKP",
            "crv": "Ed25519",
            "alg": "EdDSA",
            "use": "sig",
            "kid": self.kid,
            "x": b64u_encode(self.raw),
        }

    @classmethod
    def from_jwk(cls, jwk: dict) -> "VerificationKey":
        if jwk.get("kty") != "OKP" or jwk.get("crv") != "Ed25519":
            raise MalformedToken("unsupported JWK")
        return cls(b64u_decode(jwk["x"]), jwk.get("kid", ""))


class Ed25519Scheme:
    """Default signing scheme: deterministic Ed25519."""

    algorithm = "EdDSA"

    def __init__(self, private: ed25519.Ed25519PrivateKey):
        self._private = private
        raw_public = private.public_key().public_bytes_raw()
        kid = b64u_encode(hashlib.sha256(raw_public).digest()[:8])
        self.verification_key = VerificationKey(raw_public, kid)

    @classmethod
    def generate(cls) -> "Ed25519Scheme":
        return cls(ed25519.Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes) -> "Ed25519Scheme":
        return cls(ed25519.Ed25519PrivateKey.from_private_bytes(seed))

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)


@dataclass(frozen=True)
class SignedIdToken:
    header: dict
    claims: IdTokenClaims
    signature: bytes
    compact: str

    def __str__(self) -> str:
        return self.compact


def _encode_header(header: dict) -> str:
    return b64u_encode(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("ascii"))


def issue_token(claims: IdTokenClaims, signing_key: Ed25519Scheme,
                group: Optional[Group] = None) -> SignedIdToken:
    """Serialize and sign a claim set; the result verifies under the matching public key."""
    claims.validate(group)
    header = {"alg": signing_key.algorithm, "kid": signing_key.verification_key.kid}
    try:
        signing_input = f"{_encode_header(header)}.{b64u_encode(claims.to_json_bytes())}"
        signature = signing_key.sign(signing_input.encode("ascii"))
    except (TypeError, ValueError) as exc:
        raise IssuanceError(f"could not serialize or sign claims: {exc}") from exc
    # One message digest happens inside the signature primitive; attribute it.
    record_hash_eval()
    return SignedIdToken(
        header=header,
        claims=claims,
        signature=signature,
        compact=f"{signing_input}.{b64u_encode(signature)}",
    )


def verify_token(token: str | SignedIdToken, trusted_key: VerificationKey, now: int,
                 expected_issuer: Optional[str] = None, group: Optional[Group] = None,
                 skew_seconds: int = 0) -> IdTokenClaims:
    """Validate a compact token; returns the claims only if everything checks out.

    Failure classes are distinct (BadSignature / Expired / WrongIssuer /
    MalformedToken) so the relying side can log what went wrong. The time
    checks are strict by default; services pass their configured clock-skew
    allowance.
    """
    compact = token.compact if isinstance(token, SignedIdToken) else token
    if not isinstance(compact, str) or compact.count(".") != 2:
        raise MalformedToken("token must have three dot-separated segments")
    header_seg, payload_seg, signature_seg = compact.split(".")
    try:
        header = json.loads(b64u_decode(header_seg))
        signature = b64u_decode(signature_seg)
    except (EncodingError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedToken(f"undecodable token segment: {exc}") from exc
    if not isinstance(header, dict) or header.get("alg") != trusted_key.algorithm:
        raise MalformedToken("unexpected token header")
    # Authenticate before parsing: the payload is untrusted until the
    # signature over the raw segments checks out.
    signing_input = f"{header_seg}.{payload_seg}".encode("ascii")
    if not trusted_key.verify(signature, signing_input):
        raise BadSignature("token signature does not verify")
    # The verifier's message digest, mirroring the one counted at issuance.
    record_hash_eval()
    try:
        payload = json.loads(b64u_decode(payload_seg))
    except (EncodingError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedToken(f"undecodable claims payload: {exc}") from exc
    claims = IdTokenClaims.from_mapping(payload)
    claims.validate(group)
    if expected_issuer is not None and claims.iss != expected_issuer:
        raise WrongIssuer(f"issuer {claims.iss!r}, expected {expected_issuer!r}")
    if now >= claims.exp + skew_seconds:
        raise Expired(f"token expired at {claims.exp}")
    if claims.iat > now + skew_seconds:
        raise Expired(f"token issued in the future ({claims.iat})")
    return claims
