"""Identity provider behaviour: discovery, blinded evaluation, fallback, refusals."""

import hashlib

import pytest

from bison.encoding import b64u_encode
from bison.idp import (
    IdentityProvider,
    MalformedBlindedAudience,
    RedirectRejected,
    SuspendedAccount,
    UnknownAccount,
    UserRecord,
    UserTable,
    demo_user_table,
    generate_user_record,
    load_user_table,
    ppid_fallback,
)
from bison.token import verify_token
from bison.wire import AuthorizationRequest
from util import seed_for_user_id

NOW = 1_700_000_000


def bison_request(client_id, nonce="n-1"):
    return AuthorizationRequest(
        client_id=client_id,
        redirect_uri="https://anonymous.invalid/bison",
        nonce=nonce,
        pairwise_subject_type="bison",
    )


def plain_request(client_id, redirect_uri, nonce="n-1"):
    return AuthorizationRequest(client_id=client_id, redirect_uri=redirect_uri, nonce=nonce)


@pytest.fixture()
def idp(tg):
    users = UserTable([
        UserRecord("alice", seed_for_user_id(tg, 2)),
        UserRecord("bob", seed_for_user_id(tg, 7)),
        UserRecord("mallory", seed_for_user_id(tg, 5), suspended=True),
    ])
    return IdentityProvider("https://idp.test", tg, users=users)


# ---------------------------------------------------------------------------
# discovery


def test_discovery_advertises_bison(idp):
    doc = idp.serve_discovery()
    assert "bison" in doc.pairwise_subject_types
    assert doc.issuer == "https://idp.test"
    assert doc.authorization_endpoint == "https://idp.test/login"


def test_discovery_key_verifies_fresh_token(idp, tg):
    doc = idp.serve_discovery()
    token = idp.handle_authorization(bison_request(tg.element_to_b64(tg.element(4))), "alice", now=NOW)
    from bison.token import VerificationKey

    key = VerificationKey.from_jwk(doc.jwks["keys"][0])
    assert verify_token(token.compact, key, NOW, expected_issuer="https://idp.test", group=tg)


# ---------------------------------------------------------------------------
# blinded evaluation


def test_blinded_evaluation_oracle(idp, tg):
    # A = 18, userId = 2: sub must decode to 18^2 mod 23 = 2
    token = idp.handle_authorization(bison_request(tg.element_to_b64(tg.element(18))), "alice", now=NOW)
    assert token.claims.pairwise_subject_type == "bison"
    assert tg.element_value(tg.element_from_b64(token.claims.sub)) == 2
    assert token.claims.aud == tg.element_to_b64(tg.element(18))


def test_aud_echoes_the_evaluated_element(idp, tg):
    for value in (4, 9, 13):
        encoded = tg.element_to_b64(tg.element(value))
        token = idp.handle_authorization(bison_request(encoded), "bob", now=NOW)
        assert token.claims.aud == encoded


def test_same_account_same_input_same_output(idp, tg):
    a = tg.element_to_b64(tg.element(8))
    t1 = idp.handle_authorization(bison_request(a), "alice", now=NOW)
    t2 = idp.handle_authorization(bison_request(a), "alice", now=NOW)
    assert t1.claims.sub == t2.claims.sub


def test_nonce_copied_verbatim(idp, tg):
    token = idp.handle_authorization(
        bison_request(tg.element_to_b64(tg.element(4)), nonce="opaque-binding-value"), "alice", now=NOW)
    assert token.claims.nonce == "opaque-binding-value"


def test_suspended_account_refused_before_any_token(idp, tg):
    with pytest.raises(SuspendedAccount):
        idp.handle_authorization(bison_request(tg.element_to_b64(tg.element(4))), "mallory", now=NOW)


def test_unknown_account(idp, tg):
    with pytest.raises(UnknownAccount):
        idp.handle_authorization(bison_request(tg.element_to_b64(tg.element(4))), "nobody", now=NOW)


def test_malformed_blinded_audience_rejected_before_evaluation(idp):
    for bad in ("AAA", "", "!!!", b64u_encode((1).to_bytes(2, "big")), b64u_encode(bytes(3))):
        with pytest.raises(MalformedBlindedAudience):
            idp.handle_authorization(bison_request(bad), "alice", now=NOW)


def test_token_lifetime(idp, tg):
    token = idp.handle_authorization(bison_request(tg.element_to_b64(tg.element(4))), "alice", now=NOW)
    assert token.claims.iat == NOW
    assert token.claims.exp == NOW + 300


# ---------------------------------------------------------------------------
# fallback


def test_fallback_without_marker(idp):
    token = idp.handle_authorization(plain_request("https://sp.test", "https://sp.test/return"),
                                     "alice", now=NOW)
    assert token.claims.pairwise_subject_type is None
    assert token.claims.aud == "https://sp.test"
    expected = b64u_encode(hashlib.sha512(b"https://sp.test" + idp.users.get("alice").seed).digest())
    assert token.claims.sub == expected


def test_ppid_is_deterministic_and_scoped():
    seed_a, seed_b = b"a" * 32, b"b" * 32
    assert ppid_fallback("client-1", seed_a) == ppid_fallback("client-1", seed_a)
    assert ppid_fallback("client-1", seed_a) != ppid_fallback("client-2", seed_a)
    assert ppid_fallback("client-1", seed_a) != ppid_fallback("client-1", seed_b)
    # SHA-512 oracle on a fixed vector
    assert ppid_fallback("client-1", seed_a) == b64u_encode(
        hashlib.sha512(b"client-1" + seed_a).digest())


def test_fallback_redirect_must_match_registration(idp):
    idp.registered_clients["https://sp.test"] = ["https://sp.test/return"]
    ok = idp.handle_authorization(plain_request("https://sp.test", "https://sp.test/return"),
                                  "alice", now=NOW)
    assert ok.claims.aud == "https://sp.test"
    with pytest.raises(RedirectRejected):
        idp.handle_authorization(plain_request("https://sp.test", "https://evil.test/return"),
                                 "alice", now=NOW)
    with pytest.raises(RedirectRejected):
        idp.handle_authorization(plain_request("https://unregistered.test",
                                               "https://unregistered.test/return"), "alice", now=NOW)


def test_bison_mode_skips_redirect_validation(idp, tg):
    # the provider cannot vet a location it must not learn
    idp.registered_clients["somebody"] = ["https://somebody/return"]
    token = idp.handle_authorization(bison_request(tg.element_to_b64(tg.element(4))), "alice", now=NOW)
    assert token.claims.pairwise_subject_type == "bison"


# ---------------------------------------------------------------------------
# what the provider observes


def test_request_log_never_contains_audience_material(idp, tg):
    audience = "secret-destination.example"
    aud_element = tg.hash_to_group(audience.encode())
    r = tg.scalar(6)
    blinded = tg.scalar_mult(r, aud_element)
    idp.handle_authorization(bison_request(tg.element_to_b64(blinded)), "alice", now=NOW)

    forbidden = {
        audience,
        tg.element_to_b64(aud_element),
        tg.encode_element(aud_element).hex(),
        str(tg.element_value(aud_element)),
    }
    assert idp.request_log, "provider must log what it received"
    for entry in idp.request_log:
        for value in entry.values():
            assert value not in forbidden
    # the blinded element is the only audience-derived thing it may see
    assert any(tg.element_to_b64(blinded) in entry.values() for entry in idp.request_log)


def test_no_substitution_across_concurrent_requests(idp, tg):
    """Every token's aud is the exact element its request carried, and its
    sub is that element evaluated, even under parallel issuance."""
    from concurrent.futures import ThreadPoolExecutor

    elements = [tg.element(v) for v in (2, 3, 4, 6, 8, 9, 12, 13, 16, 18)]

    def issue(element):
        encoded = tg.element_to_b64(element)
        token = idp.handle_authorization(bison_request(encoded), "alice", now=NOW)
        return encoded, token

    with ThreadPoolExecutor(max_workers=8) as pool:
        outcomes = list(pool.map(issue, elements * 4))

    user_id = idp.users.get("alice").user_id(tg)
    for encoded, token in outcomes:
        assert token.claims.aud == encoded
        expected = tg.scalar_mult(user_id, tg.element_from_b64(encoded))
        assert token.claims.sub == tg.element_to_b64(expected)


# ---------------------------------------------------------------------------
# user records


def test_user_record_seed_length_enforced():
    with pytest.raises(ValueError):
        UserRecord("short", b"tiny")


def test_generated_records_are_random():
    seeds = {generate_user_record(f"u{i}").seed for i in range(8)}
    assert len(seeds) == 8


def test_user_id_stable_across_restarts(tg, tmp_path):
    table = UserTable([generate_user_record("alice")])
    path = tmp_path / "users.json"
    path.write_text(table.to_json())
    reloaded = load_user_table(path)
    assert reloaded.get("alice").user_id(tg) == table.get("alice").user_id(tg)


def test_demo_table_has_three_accounts():
    table = demo_user_table()
    assert len(table.labels()) == 3
    assert not any(table.get(label).suspended for label in table.labels())
