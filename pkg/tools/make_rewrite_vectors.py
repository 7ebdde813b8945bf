#!/usr/bin/env python3
"""Regenerate the shared rewrite test vectors.

Each vector fixes (audience, origin, nonce, r) and records the two fields a
correct user agent must produce: the blinded client identifier and the
origin-bound nonce. Both the Python agent tests and the browser agent's
test suite consume the same file, which is how the two implementations stay
bit-compatible.
"""

import json
import secrets
from pathlib import Path

from bison.core import AudienceId, blind
from bison.group import Ristretto255Group
from bison.sp import expected_nonce_binding

OUT = Path(__file__).resolve().parent.parent / "testvectors" / "rewrite_vectors.json"

CASES = [
    ("example.com", "https://login.example.com"),
    ("example.com", "https://app.example.com:8443"),
    ("login.example.com", "https://login.example.com"),
    ("shop.example", "https://checkout.shop.example"),
    ("shared.co.uk", "https://a.shared.co.uk"),
    ("shared.co.uk", "https://b.shared.co.uk"),
    ("user.github.io", "https://user.github.io"),
    ("127.0.0.1", "http://127.0.0.1:8401"),
    ("sp.localhost", "http://login.sp.localhost:8402"),
    ("idp-facing.example", "https://sso.idp-facing.example"),
]


def main() -> None:
    group = Ristretto255Group()
    vectors = []
    for i, (audience, origin) in enumerate(CASES):
        nonce = f"vector-nonce-{i:02d}-" + secrets.token_urlsafe(8)
        r = group.random_scalar()
        aud = AudienceId.from_audience(group, audience)
        vectors.append({
            "audience": audience,
            "origin": origin,
            "nonce": nonce,
            "r": group.scalar_to_b64(r),
            "expected_client_id": group.element_to_b64(blind(aud, r)),
            "expected_nonce_binding": expected_nonce_binding(origin, nonce),
        })
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"group": "ristretto255", "hash": "SHA-512",
                               "vectors": vectors}, indent=2) + "\n")
    print(f"wrote {len(vectors)} vectors to {OUT}")


if __name__ == "__main__":
    main()
