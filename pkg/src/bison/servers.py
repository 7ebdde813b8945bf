"""HTTP wiring for the mock identity and service providers.

Routes are thin translations between the wire (query strings, form posts,
cookies) and the provider objects; all protocol logic lives in
:mod:`bison.idp` and :mod:`bison.sp`.
"""

from __future__ import annotations

from typing import Optional

import httpx

from .httpd import HttpApp, LoopbackServer, Request, Response, escape, form_post_page
from .idp import (
    AuthorizationRefused,
    IdentityProvider,
    MalformedBlindedAudience,
    RedirectRejected,
    SuspendedAccount,
    UnknownAccount,
)
from .sp import (
    AuthenticationFailed,
    BlindMismatch,
    NonceBindingMismatch,
    ReplayDetected,
    ServiceProvider,
    UnknownSession,
)
from .token import TokenError, VerificationKey
from .wire import AuthorizationRequest, WireError

__all__ = [
    "make_idp_app",
    "make_sp_app",
    "start_idp_server",
    "start_sp_server",
    "fetch_discovery",
    "verification_key_from_discovery",
    "SP_SESSION_COOKIE",
]

SP_SESSION_COOKIE = "bison_sp_auth"

_IDP_STATUS = {
    SuspendedAccount: 403,
    UnknownAccount: 404,
    MalformedBlindedAudience: 400,
    RedirectRejected: 400,
}

_SP_STATUS = {
    ReplayDetected: 409,
    BlindMismatch: 403,
    NonceBindingMismatch: 403,
    UnknownSession: 400,
}


def _error_response(request: Request, exc: Exception, status: int) -> Response:
    payload = {"error": type(exc).__name__, "detail": str(exc)}
    if request.wants_json():
        return Response.json(payload, status=status)
    return Response.html(
        f"<h1>{escape(type(exc).__name__)}</h1><p>{escape(str(exc))}</p>", status=status
    )


# ---------------------------------------------------------------------------
# identity provider


def make_idp_app(idp: IdentityProvider, app: Optional[HttpApp] = None) -> HttpApp:
    app = app or HttpApp("idp")

    @app.route("GET", "/.well-known/openid-configuration")
    def discovery(request: Request) -> Response:
        return Response.json(idp.serve_discovery().to_mapping())

    @app.route("GET", "/login")
    def login_page(request: Request) -> Response:
        hidden = "\n".join(
            f'      <input type="hidden" name="{escape(k, quote=True)}" value="{escape(v, quote=True)}">'
            for k, v in request.query.items()
        )
        received = "\n".join(
            f"      <li><code>{escape(k)}</code> = <code>{escape(v)}</code></li>"
            for k, v in sorted(request.query.items())
        )
        choices = "\n".join(
            f'      <button type="submit" name="account" value="{escape(label, quote=True)}">'
            f"Continue as {escape(label)}</button>"
            for label in idp.users.labels()
        )
        return Response.html(f"""<!doctype html>
<html>
<head><title>Identity provider</title></head>
<body>
  <h1>Sign in</h1>
  <p>Authorization request received with these parameters:</p>
  <ul>
{received}
  </ul>
  <form method="post" action="/login">
{hidden}
    <fieldset>
      <legend>Choose an identity</legend>
{choices}
    </fieldset>
  </form>
</body>
</html>""")

    @app.route("POST", "/login")
    def complete_login(request: Request) -> Response:
        params = {k: v for k, v in request.form.items() if k != "account"}
        account = request.form.get("account", "")
        try:
            auth_request = AuthorizationRequest.from_params(params)
            token = idp.handle_authorization(auth_request, account)
        except WireError as exc:
            return _error_response(request, exc, 400)
        except AuthorizationRefused as exc:
            return _error_response(request, exc, _IDP_STATUS.get(type(exc), 400))
        return Response.html(
            form_post_page(auth_request.redirect_uri, {"id_token": token.compact},
                           title="Returning to the application")
        )

    return app


# ---------------------------------------------------------------------------
# service provider


def make_sp_app(sp: ServiceProvider, authorization_endpoint: str,
                app: Optional[HttpApp] = None) -> HttpApp:
    app = app or HttpApp("sp")

    @app.route("GET", "/")
    def index(request: Request) -> Response:
        return Response.html(f"""<!doctype html>
<html>
<head><title>Service provider</title></head>
<body>
  <h1>{escape(sp.origin)}</h1>
  <p>Pseudonym scope: <code>{escape(sp.audience)}</code></p>
  <p><a href="/auth">Log in</a></p>
</body>
</html>""")

    @app.route("GET", "/auth")
    def start(request: Request) -> Response:
        auth_request, pending = sp.start_auth()
        location = f"{authorization_endpoint}?{auth_request.to_query()}"
        return Response.redirect(location).with_cookie(SP_SESSION_COOKIE, pending.key)

    @app.route("POST", "/return")
    def finish(request: Request) -> Response:
        key = request.cookies.get(SP_SESSION_COOKIE)
        pending = sp.pending.get(key) if key else None
        try:
            if pending is None:
                raise UnknownSession("no pending authentication for this session")
            if "id_token" not in request.form:
                raise UnknownSession("missing id_token form field")
            result = sp.complete_auth(request.form["id_token"], request.form.get("blind"), pending)
        except AuthenticationFailed as exc:
            return _error_response(request, exc, _SP_STATUS.get(type(exc), 400))
        except TokenError as exc:
            return _error_response(request, exc, 401)
        if request.wants_json():
            return Response.json(result.to_mapping())
        return Response.html(f"""<!doctype html>
<html>
<head><title>Signed in</title></head>
<body>
  <h1>Signed in</h1>
  <p>Derivation: <code>{escape(result.derivation_mode)}</code></p>
  <p>Audience: <code>{escape(result.audience)}</code></p>
  <p>Your pseudonym: <code id="pseudonym">{escape(result.pseudonym)}</code></p>
</body>
</html>""")

    return app


# ---------------------------------------------------------------------------
# bootstrapping


def start_idp_server(idp_factory, host: str = "127.0.0.1", port: int = 0):
    """Bind first, then build: the issuer URL needs the assigned port.

    ``idp_factory(issuer_url)`` returns the provider instance.
    """
    app = HttpApp("idp")
    server = LoopbackServer(app, host=host, port=port)
    idp = idp_factory(server.base_url)
    make_idp_app(idp, app=app)
    server.start()
    return server, idp


def start_sp_server(sp_factory, authorization_endpoint: str,
                    host: str = "127.0.0.1", port: int = 0,
                    origin_host: Optional[str] = None):
    """Same two-phase dance for the service provider.

    ``sp_factory(origin)`` returns the provider; ``origin_host`` lets the
    logical origin use a hostname while the socket stays on loopback (test
    drivers map the name back to the address, like ``curl --resolve``).
    """
    app = HttpApp("sp")
    server = LoopbackServer(app, host=host, port=port)
    origin = f"http://{origin_host or server.host}:{server.port}"
    sp = sp_factory(origin)
    make_sp_app(sp, authorization_endpoint, app=app)
    server.start()
    return server, sp


def fetch_discovery(idp_base_url: str, client: Optional[httpx.Client] = None) -> dict:
    """The relying side's startup step: read the provider metadata."""
    url = f"{idp_base_url.rstrip('/')}/.well-known/openid-configuration"
    if client is not None:
        response = client.get(url)
    else:
        response = httpx.get(url)
    response.raise_for_status()
    return response.json()


def verification_key_from_discovery(discovery: dict) -> VerificationKey:
    keys = discovery.get("jwks", {}).get("keys", [])
    if not keys:
        raise TokenError("discovery document exposes no keys")
    return VerificationKey.from_jwk(keys[0])
