"""Protocol-aware user device, headless flavour.

Sits between the service provider and the identity provider. For an
authorization request that opts into blinded derivation, it checks that the
requested audience is one the current page origin may use, asks for
consent, then rewrites the request: the client identifier becomes the
blinded audience element, the return location becomes a constant
non-resolving URL, and the nonce becomes a hash binding the provider's
nonce to the user-facing origin. On the way back it re-attaches the blind
and forwards the token to the original return location.

Everything the agent keeps is scoped to one in-flight authentication and
destroyed on completion; a brand-new agent instance produces the same
pseudonyms, which is the whole point of keeping the device stateless.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Union

from . import core
from .encoding import canonical_origin, is_secure_origin, split_origin
from .group import Group, GroupScalar
from .sp import expected_nonce_binding
from .suffixes import PublicSuffixList, is_registrable_suffix_of
from .token import BISON_SUBJECT_TYPE
from .wire import AuthorizationRequest, CONSTANT_REDIRECT_TARGET

__all__ = [
    "OriginContext",
    "RewriteRecord",
    "RewriteResult",
    "ReturnPost",
    "Agent",
    "AgentError",
    "ConsentDenied",
    "UnknownReturn",
    "StaleRecord",
    "RECORD_TTL",
]

RECORD_TTL = 600  # seconds; an in-flight flow older than this is abandoned


class AgentError(Exception):
    pass


class ConsentDenied(AgentError):
    """User declined; the original request must not proceed either."""


class UnknownReturn(AgentError):
    """Return leg with no matching in-flight record."""


class StaleRecord(AgentError):
    """The in-flight record outlived its time budget."""


@dataclass(frozen=True)
class OriginContext:
    """Where the user currently is, as trusted information from the transport."""

    current_origin: str
    is_secure_context: bool

    @classmethod
    def for_page(cls, origin: str) -> "OriginContext":
        origin = canonical_origin(origin)
        return cls(current_origin=origin, is_secure_context=is_secure_origin(origin))


@dataclass
class RewriteRecord:
    """Ephemeral per-flow state: everything needed to finish the return leg."""

    handle: str
    original_redirect_uri: str
    blind: GroupScalar
    audience: str
    created_at: float


@dataclass(frozen=True)
class RewriteResult:
    request: AuthorizationRequest
    record: Optional[RewriteRecord]  # None when passed through unmodified

    @property
    def modified(self) -> bool:
        return self.record is not None


@dataclass(frozen=True)
class ReturnPost:
    """The form post the agent forwards to the service provider."""

    url: str
    fields: dict[str, str]


class Agent:
    def __init__(
        self,
        group: Group,
        psl: Optional[PublicSuffixList] = None,
        consent: Union[bool, Callable[[str, str], bool]] = True,
        record_ttl: float = RECORD_TTL,
    ):
        self.group = group
        self.psl = psl or PublicSuffixList.bundled()
        self._consent = consent
        self._record_ttl = record_ttl
        self._records: dict[str, RewriteRecord] = {}
        self._lock = threading.Lock()

    # -- audience authorization -------------------------------------------------

    def authorize_audience(self, audience: str, origin: OriginContext) -> bool:
        """May a page on this origin use this audience?

        Yes iff the audience equals the origin's host or is a registrable
        domain suffix of it. Failing the check does not abort the flow; the
        request simply proceeds un-blinded as plain OIDC.
        """
        if not origin.is_secure_context:
            return False
        try:
            host = split_origin(origin.current_origin)[1]
        except ValueError:
            return False
        return is_registrable_suffix_of(audience, host, self.psl)

    # -- request leg ------------------------------------------------------------

    def rewrite_request(
        self,
        request: AuthorizationRequest,
        origin: OriginContext,
        consent: Optional[bool] = None,
        blind: Optional[GroupScalar] = None,
        rng=None,
    ) -> RewriteResult:
        """Apply the blinding rewrite, or pass the request through untouched.

        Pass-through (no record created) happens when the request does not
        opt into blinded derivation, the context is not secure, or the
        audience check fails. Consent denial is different: the user said no,
        so nothing may be sent at all and ConsentDenied is raised.

        ``blind`` lets the caller supply the blinding scalar: used by the
        replay-hardened variant (provider-chosen blind) and by test vectors.
        """
        if not request.offers_subject_type(BISON_SUBJECT_TYPE):
            return RewriteResult(request, None)
        if not origin.is_secure_context:
            return RewriteResult(request, None)

        audience = self._requested_audience(request)
        if not self.authorize_audience(audience, origin):
            return RewriteResult(request, None)

        if consent is None:
            consent = self._consent(origin.current_origin, audience) if callable(self._consent) else self._consent
        if not consent:
            raise ConsentDenied(f"user declined blinding for audience {audience!r}")

        if blind is None and request.blind is not None:
            blind = self.group.scalar_from_b64(request.blind)
        r = blind if blind is not None else self.group.random_scalar(rng)
        audience_id = core.AudienceId.from_audience(self.group, audience)
        blinded = core.blind(audience_id, r)

        record = RewriteRecord(
            handle=secrets.token_urlsafe(16),
            original_redirect_uri=request.redirect_uri,
            blind=r,
            audience=audience,
            created_at=time.time(),
        )
        rewritten = AuthorizationRequest(
            client_id=self.group.element_to_b64(blinded),
            redirect_uri=CONSTANT_REDIRECT_TARGET,
            nonce=expected_nonce_binding(origin.current_origin, request.nonce),
            scope=request.scope,
            response_type=request.response_type,
            response_mode=request.response_mode,
            pairwise_subject_type=BISON_SUBJECT_TYPE,
        )
        with self._lock:
            self._records[record.handle] = record
        return RewriteResult(rewritten, record)

    def _requested_audience(self, request: AuthorizationRequest) -> str:
        if request.audience_id is not None:
            return request.audience_id
        # Default scope: the client identifier, which for web providers is
        # their origin; the audience is its host.
        try:
            return split_origin(request.client_id)[1]
        except ValueError:
            return request.client_id

    # -- return leg ---------------------------------------------------------------

    def handle_return(
        self,
        post_target: str,
        id_token: str,
        record: Union[RewriteRecord, str],
    ) -> ReturnPost:
        """Attach the blind and redirect the response to where it was meant to go.

        The record is destroyed first, so a second return for the same flow
        finds nothing. Unknown or stale returns are dropped; the constant
        target must never actually be fetched.
        """
        if post_target.rstrip("/") != CONSTANT_REDIRECT_TARGET:
            raise UnknownReturn(f"not the constant return target: {post_target!r}")
        handle = record.handle if isinstance(record, RewriteRecord) else record
        with self._lock:
            found = self._records.pop(handle, None)
        if found is None:
            raise UnknownReturn("no in-flight record for this return")
        if time.time() - found.created_at > self._record_ttl:
            raise StaleRecord(f"flow {handle} exceeded {self._record_ttl}s")
        return ReturnPost(
            url=found.original_redirect_uri,
            fields={"id_token": id_token, "blind": self.group.scalar_to_b64(found.blind)},
        )

    # -- bookkeeping ---------------------------------------------------------------

    def in_flight(self) -> int:
        with self._lock:
            return len(self._records)

    def drop_stale_records(self) -> int:
        deadline = time.time() - self._record_ttl
        with self._lock:
            stale = [h for h, rec in self._records.items() if rec.created_at < deadline]
            for h in stale:
                del self._records[h]
        return len(stale)
