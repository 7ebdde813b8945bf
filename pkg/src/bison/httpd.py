"""Small threaded HTTP scaffold for the demonstrator services.

Both mock services are a handful of routes serving HTML and JSON over
loopback; the standard-library threading server is plenty. Handlers are
plain functions from :class:`Request` to :class:`Response`, registered per
(method, path).
"""

from __future__ import annotations

import html
import json
import threading
from dataclasses import dataclass, field
from http.cookies import SimpleCookie
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable
from urllib.parse import parse_qsl, urlsplit

__all__ = ["Request", "Response", "HttpApp", "LoopbackServer", "form_post_page", "escape"]

escape = html.escape


@dataclass
class Request:
    method: str
    path: str
    query: dict[str, str]
    form: dict[str, str]
    headers: dict[str, str]
    cookies: dict[str, str]

    def wants_json(self) -> bool:
        return "application/json" in self.headers.get("accept", "")


@dataclass
class Response:
    status: int = 200
    body: bytes = b""
    content_type: str = "text/html; charset=utf-8"
    headers: list[tuple[str, str]] = field(default_factory=list)

    @classmethod
    def html(cls, markup: str, status: int = 200) -> "Response":
        return cls(status=status, body=markup.encode("utf-8"))

    @classmethod
    def json(cls, payload: dict, status: int = 200) -> "Response":
        return cls(status=status, body=json.dumps(payload, indent=2).encode("utf-8"),
                   content_type="application/json")

    @classmethod
    def redirect(cls, location: str) -> "Response":
        return cls(status=302, headers=[("Location", location)])

    def with_cookie(self, name: str, value: str, path: str = "/") -> "Response":
        self.headers.append(("Set-Cookie", f"{name}={value}; Path={path}; HttpOnly"))
        return self


def form_post_page(action: str, fields: dict[str, str], title: str = "Continue") -> str:
    """Self-submitting form, the transport for the implicit-flow response."""
    inputs = "\n".join(
        f'    <input type="hidden" name="{escape(k, quote=True)}" value="{escape(v, quote=True)}">'
        for k, v in fields.items()
    )
    return f"""<!doctype html>
<html>
<head><title>{escape(title)}</title></head>
<body onload="document.forms[0].submit()">
  <noscript><p>Press the button to continue.</p></noscript>
  <form method="post" action="{escape(action, quote=True)}">
{inputs}
    <noscript><button type="submit">Continue</button></noscript>
  </form>
</body>
</html>"""


class HttpApp:
    def __init__(self, name: str):
        self.name = name
        self._routes: dict[tuple[str, str], Callable[[Request], Response]] = {}

    def route(self, method: str, path: str):
        def register(handler: Callable[[Request], Response]):
            self._routes[(method, path)] = handler
            return handler
        return register

    def dispatch(self, request: Request) -> Response:
        handler = self._routes.get((request.method, request.path))
        if handler is None:
            return Response.html("<h1>404 Not Found</h1>", status=404)
        return handler(request)


class _Handler(BaseHTTPRequestHandler):
    app: HttpApp  # set by LoopbackServer

    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # noqa: A002 - BaseHTTPRequestHandler API
        pass  # loopback test services stay quiet

    def _run(self, method: str) -> None:
        parts = urlsplit(self.path)
        form: dict[str, str] = {}
        if method == "POST":
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length)
            ctype = self.headers.get("Content-Type", "")
            if "application/x-www-form-urlencoded" in ctype:
                form = dict(parse_qsl(body.decode("utf-8")))
        cookies: dict[str, str] = {}
        if "Cookie" in self.headers:
            jar = SimpleCookie(self.headers["Cookie"])
            cookies = {k: morsel.value for k, morsel in jar.items()}
        request = Request(
            method=method,
            path=parts.path,
            query=dict(parse_qsl(parts.query)),
            form=form,
            headers={k.lower(): v for k, v in self.headers.items()},
            cookies=cookies,
        )
        try:
            response = self.app.dispatch(request)
        except Exception as exc:  # noqa: BLE001 - surface as a 500, keep serving
            response = Response.json({"error": type(exc).__name__, "detail": str(exc)}, status=500)
        self.send_response(response.status)
        self.send_header("Content-Type", response.content_type)
        self.send_header("Content-Length", str(len(response.body)))
        for key, value in response.headers:
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(response.body)

    def do_GET(self) -> None:
        self._run("GET")

    def do_POST(self) -> None:
        self._run("POST")


class LoopbackServer:
    """A service bound to a loopback port, running on a daemon thread."""

    def __init__(self, app: HttpApp, host: str = "127.0.0.1", port: int = 0):
        handler = type(f"{app.name}Handler", (_Handler,), {"app": app})
        self._server = ThreadingHTTPServer((host, port), handler)
        self._server.daemon_threads = True
        self.host, self.port = self._server.server_address[:2]
        self.base_url = f"http://{self.host}:{self.port}"
        self._thread = threading.Thread(target=self._server.serve_forever, name=app.name, daemon=True)

    def start(self) -> "LoopbackServer":
        self._thread.start()
        return self

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "LoopbackServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.close()
