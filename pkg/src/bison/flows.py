"""Headless user device: drives a full authentication over real HTTP.

This is the browser's role, scripted: follow the service provider's
redirect, let the agent inspect and possibly rewrite the authorization
request, pick an account at the identity provider, and forward the form
post carrying the token, letting the agent intercept the constant return
target. A ``host_map`` resolves logical hostnames to loopback addresses
(the ``curl --resolve`` pattern), so tests can exercise named origins and
shared audiences without touching DNS.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Callable, Optional
from urllib.parse import urlsplit, urlunsplit

import httpx

from . import core
from .agent import Agent, OriginContext
from .encoding import b64u_decode, canonical_origin, is_loopback_host, split_origin
from .group import Group
from .wire import AuthorizationRequest, CONSTANT_REDIRECT_TARGET

__all__ = ["FlowOutcome", "HeadlessDevice", "FlowError", "user_side_check"]


class FlowError(Exception):
    """The flow could not proceed (transport trouble or unexpected page)."""


@dataclass
class FlowOutcome:
    """Everything the device saw during one authentication."""

    status: int
    pseudonym: Optional[str]
    derivation_mode: Optional[str]
    audience: Optional[str]
    error: Optional[str]
    id_token: Optional[str]
    blind: Optional[str]
    rewritten_client_id: Optional[str]

    @property
    def ok(self) -> bool:
        return self.error is None and self.pseudonym is not None

    def to_mapping(self) -> dict:
        return {
            "ok": self.ok,
            "status": self.status,
            "pseudonym": self.pseudonym,
            "derivation_mode": self.derivation_mode,
            "audience": self.audience,
            "error": self.error,
        }


class _FormPage(HTMLParser):
    """Extracts the first form's action and hidden/submit fields."""

    def __init__(self) -> None:
        super().__init__()
        self.action: Optional[str] = None
        self.fields: dict[str, str] = {}
        self.submit_names: list[tuple[str, str]] = []
        self._in_form = False

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        if tag == "form" and not self._in_form:
            self._in_form = True
            self.action = attrs.get("action")
        elif tag in ("input", "button") and self._in_form:
            name = attrs.get("name")
            if not name:
                return
            if attrs.get("type") == "submit" or tag == "button":
                self.submit_names.append((name, attrs.get("value", "")))
            else:
                self.fields[name] = attrs.get("value", "")

    def handle_endtag(self, tag):
        if tag == "form":
            self._in_form = False


def _parse_form(markup: str) -> _FormPage:
    page = _FormPage()
    page.feed(markup)
    if page.action is None:
        raise FlowError("expected a form on the page")
    return page


class HeadlessDevice:
    """One user device. Holds no state beyond an optional agent's in-flight records."""

    def __init__(self, agent: Optional[Agent] = None,
                 host_map: Optional[dict[str, str]] = None,
                 timeout: float = 10.0):
        self.agent = agent
        self.host_map = host_map or {}
        self._client = httpx.Client(timeout=timeout, follow_redirects=False)
        self._cookies: dict[str, dict[str, str]] = {}

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "HeadlessDevice":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- transport with logical-host resolution -------------------------------

    def _resolve(self, url: str) -> str:
        parts = urlsplit(url)
        host = parts.hostname or ""
        if host in self.host_map:
            port = f":{parts.port}" if parts.port else ""
            parts = parts._replace(netloc=f"{self.host_map[host]}{port}")
            return urlunsplit(parts)
        return url

    def _request(self, method: str, url: str, **kwargs) -> httpx.Response:
        logical_host = urlsplit(url).hostname or ""
        cookies = self._cookies.get(logical_host, {})
        headers = kwargs.pop("headers", {})
        if cookies:
            headers["Cookie"] = "; ".join(f"{k}={v}" for k, v in cookies.items())
        response = self._client.request(method, self._resolve(url), headers=headers, **kwargs)
        # Cookies are tracked here per logical host; the transport's own jar
        # would key them by the shared loopback address and leak across services.
        self._client.cookies.clear()
        for set_cookie in response.headers.get_list("set-cookie"):
            cookie = set_cookie.split(";", 1)[0]
            name, _, value = cookie.partition("=")
            self._cookies.setdefault(logical_host, {})[name.strip()] = value.strip()
        return response

    def _origin_context(self, origin: str) -> OriginContext:
        """Secure-context decision, including hosts this device resolves to loopback.

        Mirrors the potentially-trustworthy-origin rule: a host is trusted
        not only for https and *.localhost but also when it resolves to a
        loopback address, which is what the host map does.
        """
        context = OriginContext.for_page(origin)
        if not context.is_secure_context:
            host = split_origin(origin)[1]
            resolved = self.host_map.get(host)
            if resolved is not None and is_loopback_host(resolved):
                context = OriginContext(context.current_origin, True)
        return context

    # -- the flow ---------------------------------------------------------------

    def run_flow(self, sp_base_url: str, account: str,
                 page_origin: Optional[str] = None,
                 consent: Optional[bool] = None,
                 tamper_return: Optional[Callable[[dict], dict]] = None,
                 defer_return: bool = False) -> Optional[FlowOutcome]:
        """Authenticate ``account`` at the service provider; returns what the SP said.

        ``page_origin`` is the origin the user believes they are visiting
        (defaults to the service provider's own); pointing it elsewhere
        simulates an interposed page relaying a genuine request.
        ``tamper_return`` rewrites the final form fields (adversary hook);
        ``defer_return`` stops before the final post and returns None,
        leaving the pending authentication live.
        """
        page_origin = canonical_origin(page_origin or sp_base_url)

        start = self._request("GET", f"{sp_base_url.rstrip('/')}/auth")
        if start.status_code != 302:
            raise FlowError(f"expected a redirect from /auth, got {start.status_code}")
        auth_url = start.headers["location"]

        rewritten_client_id = None
        record = None
        if self.agent is not None:
            request = AuthorizationRequest.from_url(auth_url)
            context = self._origin_context(page_origin)
            result = self.agent.rewrite_request(request, context, consent=consent)
            if result.modified:
                record = result.record
                rewritten_client_id = result.request.client_id
                endpoint = urlsplit(auth_url)
                auth_url = urlunsplit(endpoint._replace(query=result.request.to_query()))

        login_page = self._request("GET", auth_url)
        if login_page.status_code != 200:
            return self._failed(login_page)
        form = _parse_form(login_page.text)
        idp_origin = canonical_origin(auth_url)
        action = form.action if "://" in (form.action or "") else f"{idp_origin}{form.action}"

        issued = self._request("POST", action, data=dict(form.fields, account=account))
        if issued.status_code != 200:
            return self._failed(issued, rewritten_client_id)
        response_form = _parse_form(issued.text)
        post_target = response_form.action or ""
        fields = dict(response_form.fields)

        blind_value = None
        if record is not None:
            forwarded = self.agent.handle_return(post_target, fields.get("id_token", ""), record)
            post_target, fields = forwarded.url, dict(forwarded.fields)
            blind_value = fields.get("blind")
        elif post_target.rstrip("/") == CONSTANT_REDIRECT_TARGET:
            raise FlowError("response addressed to the constant return target but no flow record")

        if tamper_return is not None:
            fields = tamper_return(dict(fields))
            blind_value = fields.get("blind", blind_value)
        if defer_return:
            return None
        final = self._request("POST", post_target, data=fields,
                              headers={"Accept": "application/json"})
        return self._outcome(final, fields.get("id_token"), blind_value, rewritten_client_id)

    def start_only(self, sp_base_url: str) -> str:
        """Begin an authentication and stop: fresh pending, fresh cookie."""
        start = self._request("GET", f"{sp_base_url.rstrip('/')}/auth")
        if start.status_code != 302:
            raise FlowError(f"expected a redirect from /auth, got {start.status_code}")
        return start.headers["location"]

    def post_return(self, sp_base_url: str, id_token: Optional[str],
                    blind: Optional[str]) -> FlowOutcome:
        """Post a (token, blind) pair to the provider's return endpoint as-is."""
        fields = {}
        if id_token is not None:
            fields["id_token"] = id_token
        if blind is not None:
            fields["blind"] = blind
        response = self._request("POST", f"{sp_base_url.rstrip('/')}/return",
                                 data=fields, headers={"Accept": "application/json"})
        return self._outcome(response, id_token, blind, None)

    def _failed(self, response: httpx.Response, rewritten_client_id=None) -> FlowOutcome:
        error = None
        try:
            error = response.json().get("error")
        except (json.JSONDecodeError, ValueError):
            pass
        if error is None:
            title = response.text.split("<h1>")[-1].split("</h1>")[0] if "<h1>" in response.text else ""
            error = title or f"HTTP {response.status_code}"
        return FlowOutcome(
            status=response.status_code, pseudonym=None, derivation_mode=None,
            audience=None, error=error, id_token=None, blind=None,
            rewritten_client_id=rewritten_client_id,
        )

    def _outcome(self, response: httpx.Response, id_token, blind_value,
                 rewritten_client_id) -> FlowOutcome:
        if response.status_code != 200:
            outcome = self._failed(response, rewritten_client_id)
            outcome.id_token = id_token
            outcome.blind = blind_value
            return outcome
        payload = response.json()
        return FlowOutcome(
            status=response.status_code,
            pseudonym=payload.get("pseudonym"),
            derivation_mode=payload.get("derivation_mode"),
            audience=payload.get("audience"),
            error=None,
            id_token=id_token,
            blind=blind_value,
            rewritten_client_id=rewritten_client_id,
        )


def user_side_check(outcome: FlowOutcome, group: Group,
                    remembered_pseudonym: Optional[str] = None) -> dict:
    """Verify on the user's side that the returned tuple derives the pseudonym.

    The device knows the blind and can read its own token, so it can check
    that the signed pair unblinds to the pseudonym the service provider will
    see; with a remembered pseudonym this detects a misbehaving provider
    that evaluated with a different secret.
    """
    if not outcome.ok or outcome.derivation_mode != "bison":
        raise FlowError("self-check needs a completed blinded-mode flow")
    payload = json.loads(b64u_decode(outcome.id_token.split(".")[1]))
    r = group.scalar_from_b64(outcome.blind)
    blinded_audience = group.element_from_b64(payload["aud"])
    evaluated = group.element_from_b64(payload["sub"])
    audience_id = core.AudienceId.from_audience(group, outcome.audience)
    blind_consistent = core.verify_blind(audience_id, r, blinded_audience)
    derived = core.unblind(evaluated, r).encoded
    return {
        "blind_consistent": blind_consistent,
        "derived_pseudonym": derived,
        "matches_provider": derived == outcome.pseudonym,
        "matches_remembered": (derived == remembered_pseudonym) if remembered_pseudonym else None,
    }
