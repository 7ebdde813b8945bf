"""Demo-mode HTTP forward proxy wrapping the agent.

Point a browser at this proxy and the plain-HTTP demo services become a
protocol-aware environment: authorization requests to the identity
provider's endpoint are rewritten exactly like the library agent does, and
the response's form post to the constant (unresolvable) return target is
intercepted and redirected to the original return location with the blind
attached.

One transport wrinkle: a forward proxy cannot see inside a TLS connection,
so the ``https://anonymous.invalid/bison`` form target in the provider's
response page is downgraded to ``http`` (plus a flow correlation handle) as
it passes through. The authorization request itself still carries the
constant target verbatim; the downgraded URL exists only between this proxy
and the browser and can never resolve anywhere else. In-browser deployments
intercept the request before it leaves instead; see the companion browser
extension.

Loopback demos only: there is no TLS interception and no access control.
"""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional
from urllib.parse import parse_qsl, urlsplit, urlunsplit

import httpx

from .agent import Agent, ConsentDenied, OriginContext
from .httpd import form_post_page
from .wire import AuthorizationRequest, CONSTANT_REDIRECT_TARGET, WireError

__all__ = ["AgentProxy"]

_DOWNGRADED_TARGET = CONSTANT_REDIRECT_TARGET.replace("https://", "http://", 1)
_HOP_HEADERS = {
    "connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
    "proxy-connection", "te", "trailers", "transfer-encoding", "upgrade",
}


class AgentProxy:
    """Forward proxy that lets the headless agent play the browser extension."""

    def __init__(self, agent: Agent, authorization_endpoint: str,
                 host: str = "127.0.0.1", port: int = 0,
                 log: Optional[Callable[[str], None]] = None):
        self.agent = agent
        self.authorization_endpoint = authorization_endpoint.rstrip("/")
        self._log = log or (lambda line: None)
        self._client = httpx.Client(follow_redirects=False, timeout=15.0)
        # rewritten client_id -> record handle, so the issuance response
        # passing back through can be tagged with its flow
        self._flows: dict[str, str] = {}
        self._lock = threading.Lock()

        proxy = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):  # noqa: A002
                pass

            def do_GET(self):
                proxy._handle(self, "GET")

            def do_POST(self):
                proxy._handle(self, "POST")

            def do_CONNECT(self):
                # No TLS interception; the constant target must never resolve.
                proxy._log(f"refusing CONNECT {self.path}")
                self.send_error(502, "TLS tunneling is not available in demo mode")

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True
        self.host, self.port = self._server.server_address[:2]
        self.proxy_url = f"http://{self.host}:{self.port}"
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="agent-proxy", daemon=True)

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> "AgentProxy":
        self._thread.start()
        return self

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._client.close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "AgentProxy":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- request handling -------------------------------------------------------

    def _handle(self, connection: BaseHTTPRequestHandler, method: str) -> None:
        url = connection.path
        if not url.startswith("http://"):
            connection.send_error(400, "expected an absolute http:// proxy request")
            return
        length = int(connection.headers.get("Content-Length") or 0)
        body = connection.rfile.read(length) if length else b""

        if method == "GET" and self._is_authorization_request(url):
            url = self._intercept_authorization(connection, url)
            if url is None:
                return
        elif method == "POST" and url.split("?")[0].rstrip("/") == _DOWNGRADED_TARGET:
            self._intercept_return(connection, url, body)
            return

        self._relay(connection, method, url, body)

    def _is_authorization_request(self, url: str) -> bool:
        if not url.split("?")[0].rstrip("/").startswith(self.authorization_endpoint):
            return False
        params = dict(parse_qsl(urlsplit(url).query))
        return "openid" in params.get("scope", "").split()

    def _intercept_authorization(self, connection, url: str) -> Optional[str]:
        """Rewrite in place; returns the URL to fetch (None if consent aborted)."""
        referer = connection.headers.get("Referer")
        if referer is None:
            self._log("authorization request without Referer: passing through")
            return url
        try:
            request = AuthorizationRequest.from_url(url)
        except WireError:
            return url
        context = OriginContext.for_page(referer)
        try:
            result = self.agent.rewrite_request(request, context)
        except ConsentDenied:
            self._log("consent denied: aborting navigation")
            connection.send_error(403, "Consent denied; authorization aborted")
            return None
        if not result.modified:
            self._log(f"passing through plain request from {context.current_origin}")
            return url
        with self._lock:
            self._flows[result.request.client_id] = result.record.handle
        self._log(f"blinded request for audience scope of {context.current_origin}")
        endpoint = urlsplit(url)
        return urlunsplit(endpoint._replace(query=result.request.to_query()))

    def _intercept_return(self, connection, url: str, body: bytes) -> None:
        params = dict(parse_qsl(urlsplit(url).query))
        fields = dict(parse_qsl(body.decode("utf-8")))
        handle = params.get("flow", "")
        forwarded = self.agent.handle_return(
            CONSTANT_REDIRECT_TARGET, fields.get("id_token", ""), handle
        )
        self._log(f"redirecting response to {forwarded.url}")
        # The browser itself must make the final post so its session cookie
        # for the return origin rides along; hand it a self-submitting form.
        page = form_post_page(forwarded.url, forwarded.fields,
                              title="Returning to the application").encode("utf-8")
        connection.send_response(200)
        connection.send_header("Content-Type", "text/html; charset=utf-8")
        connection.send_header("Content-Length", str(len(page)))
        connection.end_headers()
        connection.wfile.write(page)

    def _relay(self, connection, method: str, url: str, body: bytes) -> None:
        headers = {
            k: v for k, v in connection.headers.items()
            if k.lower() not in _HOP_HEADERS and k.lower() != "host"
        }
        relay = self._client.request(method, url, content=body or None, headers=headers)
        flow_handle = None
        if method == "POST" and body:
            posted = dict(parse_qsl(body.decode("utf-8", "replace")))
            with self._lock:
                flow_handle = self._flows.get(posted.get("client_id", ""))
        self._send_response(connection, relay, flow_handle)

    def _send_response(self, connection, relay: httpx.Response,
                       flow_handle: Optional[str]) -> None:
        content = relay.content
        if flow_handle and CONSTANT_REDIRECT_TARGET.encode() in content:
            downgraded = f"{_DOWNGRADED_TARGET}?flow={flow_handle}"
            content = content.replace(CONSTANT_REDIRECT_TARGET.encode(), downgraded.encode())
        connection.send_response(relay.status_code)
        for key, value in relay.headers.items():
            if key.lower() in _HOP_HEADERS or key.lower() == "content-length":
                continue
            connection.send_header(key, value)
        connection.send_header("Content-Length", str(len(content)))
        connection.end_headers()
        connection.wfile.write(content)
