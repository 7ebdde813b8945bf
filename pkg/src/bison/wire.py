"""Authorization request/response messages exchanged through the user agent.

The request rides as query parameters on the redirect to the identity
provider; the response comes back as an HTML form post. Both sides of the
protocol and the user agent parse the same structure, so it lives here
rather than in any one service.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional
from urllib.parse import parse_qsl, urlencode, urlsplit

__all__ = ["AuthorizationRequest", "WireError", "CONSTANT_REDIRECT_TARGET"]

# Where a rewritten request sends the response: a reserved-TLD URL that can
# never resolve, intercepted by the user agent before it leaves the device.
CONSTANT_REDIRECT_TARGET = "https://anonymous.invalid/bison"


class WireError(ValueError):
    """Malformed protocol message."""


@dataclass(frozen=True)
class AuthorizationRequest:
    client_id: str
    redirect_uri: str
    nonce: str
    scope: str = "openid"
    response_type: str = "id_token"
    response_mode: str = "form_post"
    # Opt-in list set by the service provider (plural), marker set by the
    # user agent after blinding (singular).
    pairwise_subject_types: tuple[str, ...] = ()
    pairwise_subject_type: Optional[str] = None
    audience_id: Optional[str] = None
    blind: Optional[str] = None  # provider-chosen blinding, replay-hardened variant only
    extra: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if "openid" not in self.scope.split():
            raise WireError("scope must contain 'openid'")

    def offers_subject_type(self, name: str) -> bool:
        return name in self.pairwise_subject_types

    def to_params(self) -> dict[str, str]:
        params = {
            "scope": self.scope,
            "client_id": self.client_id,
            "redirect_uri": self.redirect_uri,
            "nonce": self.nonce,
            "response_type": self.response_type,
            "response_mode": self.response_mode,
        }
        if self.pairwise_subject_types:
            params["pairwise_subject_types"] = " ".join(self.pairwise_subject_types)
        if self.pairwise_subject_type is not None:
            params["pairwise_subject_type"] = self.pairwise_subject_type
        if self.audience_id is not None:
            params["audience_id"] = self.audience_id
        if self.blind is not None:
            params["blind"] = self.blind
        params.update(self.extra)
        return params

    def to_query(self) -> str:
        return urlencode(self.to_params())

    @classmethod
    def from_params(cls, params: Mapping[str, str]) -> "AuthorizationRequest":
        known = {
            "scope", "client_id", "redirect_uri", "nonce", "response_type",
            "response_mode", "pairwise_subject_types", "pairwise_subject_type",
            "audience_id", "blind",
        }
        missing = {"scope", "client_id", "redirect_uri", "nonce"} - set(params)
        if missing:
            raise WireError(f"missing parameters: {sorted(missing)}")
        types = tuple(params["pairwise_subject_types"].split()) if "pairwise_subject_types" in params else ()
        return cls(
            scope=params["scope"],
            client_id=params["client_id"],
            redirect_uri=params["redirect_uri"],
            nonce=params["nonce"],
            response_type=params.get("response_type", "id_token"),
            response_mode=params.get("response_mode", "form_post"),
            pairwise_subject_types=types,
            pairwise_subject_type=params.get("pairwise_subject_type"),
            audience_id=params.get("audience_id"),
            blind=params.get("blind"),
            extra={k: v for k, v in params.items() if k not in known},
        )

    @classmethod
    def from_url(cls, url: str) -> "AuthorizationRequest":
        return cls.from_params(dict(parse_qsl(urlsplit(url).query)))

    def with_(self, **changes) -> "AuthorizationRequest":
        return replace(self, **changes)
