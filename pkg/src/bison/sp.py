"""Mock service provider: starts authentications, validates what comes back.

The provider issues a request carrying a fresh high-entropy nonce, then on
return verifies the token signature, checks that the signed blinded
audience really is its audience blinded with the scalar the user supplied,
checks the nonce binding (which ties the token to both this authentication
and the user-facing origin), consumes the pending record exactly once, and
unblinds the subject into the session pseudonym.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass
from typing import Optional

from . import core
from .encoding import EncodingError, b64u_encode, canonical_origin, split_origin
from .group import DecodeError, Group, GroupScalar, counted_sha512
from .token import (
    BISON_SUBJECT_TYPE,
    Expired,
    IdTokenClaims,
    MalformedToken,
    VerificationKey,
    verify_token,
)
from .wire import AuthorizationRequest

__all__ = [
    "PendingAuth",
    "PendingAuthStore",
    "SessionResult",
    "ServiceProvider",
    "expected_nonce_binding",
    "new_nonce",
    "AuthenticationFailed",
    "ReplayDetected",
    "BlindMismatch",
    "NonceBindingMismatch",
    "UnknownSession",
]

NONCE_BYTES = 16  # 128 bits of entropy
PENDING_TTL = 600  # seconds
CLOCK_SKEW = 60  # seconds, applied to exp/iat checks


class AuthenticationFailed(Exception):
    """A completion attempt was rejected; subclasses say why."""


class ReplayDetected(AuthenticationFailed):
    """The pending authentication was already consumed."""


class BlindMismatch(AuthenticationFailed):
    """The signed blinded audience is not audience * claimed blind."""


class NonceBindingMismatch(AuthenticationFailed):
    """The token's nonce does not bind this nonce and the expected origin."""


class UnknownSession(AuthenticationFailed):
    """No live pending authentication matches the return."""


def new_nonce() -> str:
    return b64u_encode(secrets.token_bytes(NONCE_BYTES))


def expected_nonce_binding(origin: str, nonce: str) -> str:
    """Hash of the user-facing origin and the provider's nonce.

    Replay fails because the nonce differs per authentication; relaying a
    genuine flow through a different page origin fails because the user
    agent hashes the origin the user actually visited.
    """
    if not nonce:
        raise ValueError("nonce must be non-empty")
    digest = counted_sha512(canonical_origin(origin).encode("ascii"), nonce.encode("ascii"))
    return b64u_encode(digest)


@dataclass
class PendingAuth:
    """One outstanding authentication, redeemable exactly once."""

    key: str
    nonce: str
    audience: str
    created_at: float
    consumed: bool = False
    bison_requested: bool = True
    supplied_blind: Optional[GroupScalar] = None  # replay-hardened variant


class PendingAuthStore:
    """In-memory pending authentications with atomic one-time consumption."""

    def __init__(self, ttl: float = PENDING_TTL):
        self._entries: dict[str, PendingAuth] = {}
        self._lock = threading.Lock()
        self._ttl = ttl

    def create(self, nonce: str, audience: str, *, bison_requested: bool = True,
               supplied_blind: Optional[GroupScalar] = None,
               now: Optional[float] = None) -> PendingAuth:
        pending = PendingAuth(
            key=secrets.token_urlsafe(16),
            nonce=nonce,
            audience=audience,
            created_at=time.time() if now is None else now,
            bison_requested=bison_requested,
            supplied_blind=supplied_blind,
        )
        with self._lock:
            self._prune()
            self._entries[pending.key] = pending
        return pending

    def get(self, key: str) -> Optional[PendingAuth]:
        with self._lock:
            self._prune()
            return self._entries.get(key)

    def consume(self, pending: PendingAuth) -> None:
        """Mark consumed; only the first caller gets through.

        Consumed entries stay in the store until their TTL expires, so a
        late duplicate is classified by its actual defect (replayed,
        mismatched blind, ...) rather than as an unknown session.
        """
        with self._lock:
            if pending.consumed:
                raise ReplayDetected(pending.key)
            pending.consumed = True

    def _prune(self) -> None:
        deadline = time.time() - self._ttl
        stale = [k for k, p in self._entries.items() if p.created_at < deadline]
        for k in stale:
            del self._entries[k]

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


@dataclass(frozen=True)
class SessionResult:
    pseudonym: str
    derivation_mode: str  # "bison" | "ppid-fallback"
    audience: str
    pseudonym_element: Optional[core.Pseudonym] = None

    def to_mapping(self) -> dict:
        return {
            "pseudonym": self.pseudonym,
            "derivation_mode": self.derivation_mode,
            "audience": self.audience,
        }


class ServiceProvider:
    """Relying side of the protocol.

    ``origin`` is the provider's user-facing web origin (also its OIDC
    client identifier). ``audience`` defaults to the origin's host; set it
    explicitly to share a pseudonym scope across related deployments, in
    which case the request carries it as an override parameter.
    """

    def __init__(
        self,
        origin: str,
        group: Group,
        idp_issuer: str,
        idp_key: VerificationKey,
        audience: Optional[str] = None,
        bison_enabled: bool = True,
        provider_samples_blind: bool = False,
        clock_skew: int = CLOCK_SKEW,
        pending_ttl: float = PENDING_TTL,
    ):
        self.origin = canonical_origin(origin)
        self.group = group
        self.idp_issuer = idp_issuer.rstrip("/")
        self.idp_key = idp_key
        self.origin_host = split_origin(self.origin)[1]
        self.audience = audience if audience is not None else self.origin_host
        self.bison_enabled = bison_enabled
        self.provider_samples_blind = provider_samples_blind
        self.clock_skew = clock_skew
        self.pending = PendingAuthStore(ttl=pending_ttl)

    # -- request leg ----------------------------------------------------------

    def start_auth(self, now: Optional[float] = None) -> tuple[AuthorizationRequest, PendingAuth]:
        """Fresh nonce, optional blinded-derivation opt-in, optional audience override."""
        nonce = new_nonce()
        supplied_blind = None
        blind_param = None
        if self.bison_enabled and self.provider_samples_blind:
            supplied_blind = self.group.random_scalar()
            blind_param = self.group.scalar_to_b64(supplied_blind)
        pending = self.pending.create(
            nonce,
            self.audience,
            bison_requested=self.bison_enabled,
            supplied_blind=supplied_blind,
            now=now,
        )
        request = AuthorizationRequest(
            client_id=self.origin,
            redirect_uri=f"{self.origin}/return",
            nonce=nonce,
            pairwise_subject_types=(BISON_SUBJECT_TYPE,) if self.bison_enabled else (),
            audience_id=self.audience if self.audience != self.origin_host else None,
            blind=blind_param,
        )
        return request, pending

    # -- return leg -----------------------------------------------------------

    def complete_auth(
        self,
        id_token: str,
        blind_param: Optional[str],
        pending: PendingAuth,
        now: Optional[int] = None,
    ) -> SessionResult:
        """Validate the returned token against the pending authentication.

        Check order matters for attribution: a doctored blind is reported as
        BlindMismatch even when the pending record was already burned, and
        the one-time consumption happens only after all content checks pass,
        so concurrent attempts race on consumption alone.
        """
        now = int(time.time()) if now is None else now
        claims = verify_token(
            id_token,
            self.idp_key,
            now,
            expected_issuer=self.idp_issuer,
            group=self.group,
            skew_seconds=self.clock_skew,
        )
        if claims.iat < pending.created_at - self.clock_skew:
            raise Expired(f"token predates this authentication (iat {claims.iat})")

        if claims.pairwise_subject_type == BISON_SUBJECT_TYPE:
            return self._complete_bison(claims, blind_param, pending)
        return self._complete_fallback(claims, pending)

    def _complete_bison(self, claims: IdTokenClaims, blind_param: Optional[str],
                        pending: PendingAuth) -> SessionResult:
        if blind_param is None:
            raise BlindMismatch("no blind parameter supplied")
        try:
            r = self.group.scalar_from_b64(blind_param)
        except (DecodeError, EncodingError) as exc:
            raise BlindMismatch(f"undecodable blind parameter: {exc}") from exc
        if pending.supplied_blind is not None and r != pending.supplied_blind:
            raise BlindMismatch("blind differs from the provider-chosen value")

        audience_id = core.AudienceId.from_audience(self.group, pending.audience)
        blinded_audience = self.group.element_from_b64(claims.aud)  # decodability checked by verify_token
        if not core.verify_blind(audience_id, r, blinded_audience):
            raise BlindMismatch("signed blinded audience does not match the claimed blind")

        if claims.nonce != expected_nonce_binding(self.origin, pending.nonce):
            raise NonceBindingMismatch("token nonce is not bound to this authentication and origin")

        self.pending.consume(pending)
        pseudonym = core.unblind(self.group.element_from_b64(claims.sub), r)
        return SessionResult(
            pseudonym=pseudonym.encoded,
            derivation_mode=BISON_SUBJECT_TYPE,
            audience=pending.audience,
            pseudonym_element=pseudonym,
        )

    def _complete_fallback(self, claims: IdTokenClaims, pending: PendingAuth) -> SessionResult:
        if claims.aud != self.origin:
            raise MalformedToken(f"audience {claims.aud!r} is not this client")
        if claims.nonce != pending.nonce:
            raise NonceBindingMismatch("token nonce differs from the stored nonce")
        self.pending.consume(pending)
        return SessionResult(
            pseudonym=claims.sub,
            derivation_mode="ppid-fallback",
            audience=pending.audience,
        )
