"""Wire encodings shared by every component: unpadded base64url and canonical web origins."""

import base64
import binascii
from urllib.parse import urlsplit

_DEFAULT_PORTS = {"http": 80, "https": 443}


class EncodingError(ValueError):
    """A wire value could not be decoded."""


def b64u_encode(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def b64u_decode(text: str) -> bytes:
    if not isinstance(text, str) or "=" in text:
        raise EncodingError("expected unpadded base64url")
    pad = "=" * (-len(text) % 4)
    try:
        return base64.b64decode((text + pad).encode("ascii"), altchars=b"-_", validate=True)
    except (binascii.Error, ValueError, UnicodeEncodeError) as exc:
        raise EncodingError(f"invalid base64url: {exc}") from exc


def split_origin(origin: str) -> tuple[str, str, int | None]:
    """Parse an origin into (scheme, lowercase host, explicit-or-None port)."""
    parts = urlsplit(origin if "//" in origin else f"https://{origin}")
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    if not scheme or not host:
        raise EncodingError(f"not an origin: {origin!r}")
    try:
        port = parts.port
    except ValueError as exc:
        raise EncodingError(f"bad port in origin: {origin!r}") from exc
    return scheme, host, port


def canonical_origin(origin: str) -> str:
    """Normalize an origin: lowercase scheme and host, default ports elided, no path.

    The user agent and the service provider both hash origins; the two sides
    must agree on this serialization byte for byte.
    """
    scheme, host, port = split_origin(origin)
    if port is None or port == _DEFAULT_PORTS.get(scheme):
        return f"{scheme}://{host}"
    return f"{scheme}://{host}:{port}"


def is_loopback_host(host: str) -> bool:
    host = host.lower()
    return (
        host == "localhost"
        or host.endswith(".localhost")
        or host in ("::1", "[::1]")
        or host.startswith("127.")
    )


def is_secure_origin(origin: str) -> bool:
    """Potentially-trustworthy origins: https anywhere, any scheme on loopback."""
    scheme, host, _ = split_origin(origin)
    return scheme == "https" or is_loopback_host(host)
