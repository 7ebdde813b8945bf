"""Mock identity provider: discovery, account selection, blinded evaluation.

Authentication is a plain account choice among a small fixed user table
(real authenticators are out of scope). For a blinded request the provider
decodes the blinded audience element from ``client_id``, multiplies it by
the account's secret scalar and signs the pair; it never sees which
audience it just evaluated. Requests without the blinded-derivation marker
get the classic pairwise identifier treatment instead, so unaware user
devices keep working.
"""

from __future__ import annotations

import json
import secrets
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from . import core
from .encoding import b64u_decode, b64u_encode, EncodingError
from .group import DecodeError, Group, GroupScalar, counted_sha512
from .token import BISON_SUBJECT_TYPE, Ed25519Scheme, IdTokenClaims, SignedIdToken, issue_token
from .wire import AuthorizationRequest

__all__ = [
    "UserRecord",
    "UserTable",
    "DiscoveryDocument",
    "IdentityProvider",
    "ppid_fallback",
    "AuthorizationRefused",
    "SuspendedAccount",
    "UnknownAccount",
    "MalformedBlindedAudience",
    "RedirectRejected",
    "generate_user_record",
    "load_user_table",
    "demo_user_table",
]

SEED_BYTES = 32
DEFAULT_TOKEN_LIFETIME = 300  # seconds


class AuthorizationRefused(Exception):
    """The provider refused to complete the authorization."""


class SuspendedAccount(AuthorizationRefused):
    pass


class UnknownAccount(AuthorizationRefused):
    pass


class MalformedBlindedAudience(AuthorizationRefused):
    """client_id did not decode to a group element; nothing was evaluated."""


class RedirectRejected(AuthorizationRefused):
    """Fallback-mode redirect_uri is not registered for this client."""


@dataclass
class UserRecord:
    """One provider-side account.

    The secret scalar is derived from a stored random 32-byte seed rather
    than stored directly, which keeps the persisted format independent of
    the group in use. Seeds are generated, never user-chosen, so the scalar
    is unpredictable; a guessable scalar would let audiences reverse
    pseudonyms by enumeration.
    """

    account_label: str
    seed: bytes
    suspended: bool = False

    def __post_init__(self) -> None:
        if len(self.seed) != SEED_BYTES:
            raise ValueError(f"seed must be {SEED_BYTES} bytes")

    def user_id(self, group: Group) -> GroupScalar:
        return group.hash_to_scalar(self.seed)


def generate_user_record(account_label: str) -> UserRecord:
    return UserRecord(account_label=account_label, seed=secrets.token_bytes(SEED_BYTES))


class UserTable:
    def __init__(self, records: list[UserRecord]):
        self._by_label = {record.account_label: record for record in records}
        if len(self._by_label) != len(records):
            raise ValueError("duplicate account labels")

    def get(self, account_label: str) -> UserRecord:
        try:
            return self._by_label[account_label]
        except KeyError:
            raise UnknownAccount(account_label) from None

    def labels(self) -> list[str]:
        return list(self._by_label)

    def to_json(self) -> str:
        return json.dumps(
            {"users": [
                {"account_label": r.account_label, "seed": b64u_encode(r.seed), "suspended": r.suspended}
                for r in self._by_label.values()
            ]},
            indent=2,
        )


def _table_from_mapping(payload: dict) -> UserTable:
    records = [
        UserRecord(
            account_label=entry["account_label"],
            seed=b64u_decode(entry["seed"]),
            suspended=bool(entry.get("suspended", False)),
        )
        for entry in payload["users"]
    ]
    return UserTable(records)


def load_user_table(path: str | Path) -> UserTable:
    """Load the account file (a single JSON document; there is no database)."""
    return _table_from_mapping(json.loads(Path(path).read_text("utf-8")))


def demo_user_table() -> UserTable:
    """The three fixed demo identities; stable seeds keep pseudonyms stable across restarts."""
    text = resources.files("bison.data").joinpath("demo_users.json").read_text("utf-8")
    return _table_from_mapping(json.loads(text))


@dataclass(frozen=True)
class DiscoveryDocument:
    issuer: str
    authorization_endpoint: str
    jwks: dict
    pairwise_subject_types: tuple[str, ...]

    def to_mapping(self) -> dict:
        return {
            "issuer": self.issuer,
            "authorization_endpoint": self.authorization_endpoint,
            "jwks": self.jwks,
            "pairwise_subject_types": list(self.pairwise_subject_types),
            "response_types_supported": ["id_token"],
            "response_modes_supported": ["form_post"],
            "id_token_signing_alg_values_supported": ["EdDSA"],
            "scopes_supported": ["openid"],
        }


def ppid_fallback(client_id: str, user_seed: bytes) -> str:
    """Classic pairwise identifier: hash of the client identifier and account seed.

    Deterministic, so the same client always sees the same subject, and
    audience-specific, so two clients cannot correlate their subjects.
    """
    return b64u_encode(counted_sha512(client_id.encode("utf-8"), user_seed))


class IdentityProvider:
    """Issues signed ID tokens after mock authentication.

    Apart from the immutable signing key and the user table, handlers share
    no per-request state; the request log exists so tests can assert what
    the provider was able to observe.
    """

    def __init__(
        self,
        issuer: str,
        group: Group,
        users: Optional[UserTable] = None,
        signing_key: Optional[Ed25519Scheme] = None,
        registered_clients: Optional[dict[str, list[str]]] = None,
        token_lifetime: int = DEFAULT_TOKEN_LIFETIME,
    ):
        self.issuer = issuer.rstrip("/")
        self.group = group
        self.users = users or demo_user_table()
        self.signing_key = signing_key or Ed25519Scheme.generate()
        self.registered_clients = registered_clients or {}
        self.token_lifetime = token_lifetime
        self.request_log: list[dict[str, str]] = []

    # -- endpoints ------------------------------------------------------------

    def serve_discovery(self) -> DiscoveryDocument:
        return DiscoveryDocument(
            issuer=self.issuer,
            authorization_endpoint=f"{self.issuer}/login",
            jwks={"keys": [self.signing_key.verification_key.to_jwk()]},
            pairwise_subject_types=(BISON_SUBJECT_TYPE,),
        )

    def handle_authorization(
        self,
        request: AuthorizationRequest,
        selected_account: str,
        now: Optional[int] = None,
    ) -> SignedIdToken:
        """Authenticate (by selection), evaluate or fall back, and sign.

        Blinded mode never validates ``redirect_uri``: the provider cannot
        vet a location it must not learn, and the constant non-resolving
        target is intercepted on the user device anyway. Fallback mode
        enforces the registered redirect like ordinary deployments do.
        """
        self.request_log.append(dict(request.to_params(), account=selected_account))
        now = int(time.time()) if now is None else now
        account = self.users.get(selected_account)
        if account.suspended:
            raise SuspendedAccount(selected_account)

        bison_mode = request.pairwise_subject_type == BISON_SUBJECT_TYPE
        if bison_mode:
            try:
                blinded_audience = self.group.element_from_b64(request.client_id)
            except (DecodeError, EncodingError) as exc:
                raise MalformedBlindedAudience(str(exc)) from exc
            evaluated = core.blind_eval(blinded_audience, account.user_id(self.group))
            aud = request.client_id
            sub = self.group.element_to_b64(evaluated)
            subject_type: Optional[str] = BISON_SUBJECT_TYPE
        else:
            # Open deployment when no clients are registered; otherwise the
            # redirect must match the registration exactly.
            if self.registered_clients:
                registered = self.registered_clients.get(request.client_id, [])
                if request.redirect_uri not in registered:
                    raise RedirectRejected(request.redirect_uri)
            aud = request.client_id
            sub = ppid_fallback(request.client_id, account.seed)
            subject_type = None

        claims = IdTokenClaims(
            iss=self.issuer,
            aud=aud,
            sub=sub,
            nonce=request.nonce,
            iat=now,
            exp=now + self.token_lifetime,
            pairwise_subject_type=subject_type,
        )
        return issue_token(claims, self.signing_key, group=self.group)
