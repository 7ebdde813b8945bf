"""Signed token format: round trips, failure classes, claim-set binding."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bison.encoding import b64u_decode, b64u_encode
from bison.token import (
    BadSignature,
    Ed25519Scheme,
    Expired,
    IdTokenClaims,
    MalformedToken,
    VerificationKey,
    WrongIssuer,
    issue_token,
    verify_token,
)

NOW = 1_700_000_000


@pytest.fixture(scope="module")
def scheme():
    return Ed25519Scheme.from_seed(bytes(range(32)))


def make_claims(**overrides):
    defaults = dict(
        iss="https://idp.test",
        aud="client-1",
        sub="subject-1",
        nonce="n-abc",
        iat=NOW,
        exp=NOW + 300,
    )
    defaults.update(overrides)
    return IdTokenClaims(**defaults)


def test_round_trip(scheme):
    token = issue_token(make_claims(), scheme)
    claims = verify_token(token.compact, scheme.verification_key, NOW,
                          expected_issuer="https://idp.test")
    assert claims == make_claims()


def test_compact_is_three_b64u_segments(scheme):
    token = issue_token(make_claims(), scheme)
    head, payload, sig = token.compact.split(".")
    assert json.loads(b64u_decode(head))["alg"] == "EdDSA"
    assert json.loads(b64u_decode(payload))["sub"] == "subject-1"
    assert b64u_decode(sig) == token.signature


def test_wrong_key_rejected(scheme):
    other = Ed25519Scheme.generate()
    token = issue_token(make_claims(), scheme)
    with pytest.raises(BadSignature):
        verify_token(token.compact, other.verification_key, NOW)


def test_payload_bitflip_rejected(scheme):
    token = issue_token(make_claims(), scheme)
    head, payload, sig = token.compact.split(".")
    raw = bytearray(b64u_decode(payload))
    raw[5] ^= 0x01
    forged = ".".join([head, b64u_encode(bytes(raw)), sig])
    with pytest.raises(BadSignature):
        verify_token(forged, scheme.verification_key, NOW)


def test_accepted_at_iat_and_expired_after_exp(scheme):
    token = issue_token(make_claims(), scheme)
    assert verify_token(token.compact, scheme.verification_key, NOW)
    with pytest.raises(Expired):
        verify_token(token.compact, scheme.verification_key, NOW + 301)


def test_skew_allowance_is_opt_in(scheme):
    token = issue_token(make_claims(), scheme)
    # strict by default at the boundary; a service's skew loosens it
    with pytest.raises(Expired):
        verify_token(token.compact, scheme.verification_key, NOW + 300)
    assert verify_token(token.compact, scheme.verification_key, NOW + 300, skew_seconds=60)


def test_wrong_issuer(scheme):
    token = issue_token(make_claims(), scheme)
    with pytest.raises(WrongIssuer):
        verify_token(token.compact, scheme.verification_key, NOW,
                     expected_issuer="https://other.test")


def test_malformed_rejections(scheme):
    with pytest.raises(MalformedToken):
        verify_token("only.two", scheme.verification_key, NOW)
    with pytest.raises(MalformedToken):
        verify_token("a.b.c", scheme.verification_key, NOW)
    token = issue_token(make_claims(), scheme)
    with pytest.raises(MalformedToken):
        verify_token(token.compact + ".d", scheme.verification_key, NOW)


def test_exp_must_follow_iat(scheme):
    with pytest.raises(MalformedToken):
        issue_token(make_claims(exp=NOW), scheme)


def test_bison_claims_must_decode_to_group_elements(tg, scheme):
    a = tg.element_to_b64(tg.element(4))
    b = tg.element_to_b64(tg.element(16))
    good = make_claims(aud=a, sub=b, pairwise_subject_type="bison")
    token = issue_token(good, scheme, group=tg)
    assert verify_token(token.compact, scheme.verification_key, NOW, group=tg)

    identity = b64u_encode((1).to_bytes(2, "big"))
    with pytest.raises(MalformedToken):
        issue_token(make_claims(aud=identity, sub=b, pairwise_subject_type="bison"), scheme, group=tg)

    # a tampered token whose aud was swapped for the identity must not validate
    forged_claims = dict(json.loads(b64u_decode(token.compact.split(".")[1])), aud=identity)
    payload = b64u_encode(json.dumps(forged_claims, sort_keys=True, separators=(",", ":")).encode())
    head = token.compact.split(".")[0]
    forged = f"{head}.{payload}." + token.compact.split(".")[2]
    with pytest.raises(BadSignature):  # signature breaks before the invariant check
        verify_token(forged, scheme.verification_key, NOW, group=tg)

    # even a properly signed token (malicious issuer) with an identity aud
    # fails the group invariant at verification
    signing_input = f"{head}.{payload}"
    resigned = f"{signing_input}.{b64u_encode(scheme.sign(signing_input.encode()))}"
    with pytest.raises(MalformedToken):
        verify_token(resigned, scheme.verification_key, NOW, group=tg)


def test_signature_binds_aud_and_sub_jointly(tg, scheme):
    """Mutating either half of the signed pair invalidates the token."""
    a1, a2 = tg.element_to_b64(tg.element(4)), tg.element_to_b64(tg.element(8))
    b1, b2 = tg.element_to_b64(tg.element(16)), tg.element_to_b64(tg.element(9))
    token = issue_token(make_claims(aud=a1, sub=b1, pairwise_subject_type="bison"), scheme, group=tg)
    head, _, sig = token.compact.split(".")
    for aud, sub in ((a2, b1), (a1, b2), (a2, b2)):
        mutated = make_claims(aud=aud, sub=sub, pairwise_subject_type="bison").to_json_bytes()
        with pytest.raises(BadSignature):
            verify_token(f"{head}.{b64u_encode(mutated)}.{sig}",
                         scheme.verification_key, NOW, group=tg)


claims_strategy = st.builds(
    make_claims,
    aud=st.text(min_size=1, max_size=16),
    sub=st.text(min_size=1, max_size=16),
    nonce=st.text(min_size=1, max_size=16),
    iat=st.integers(min_value=0, max_value=2**31),
)


@settings(max_examples=100)
@given(claims_strategy, claims_strategy)
def test_serialization_injective(c1, c2):
    c1 = IdTokenClaims(**{**c1.__dict__, "exp": c1.iat + 300})
    c2 = IdTokenClaims(**{**c2.__dict__, "exp": c2.iat + 300})
    if c1 != c2:
        assert c1.to_json_bytes() != c2.to_json_bytes()
    else:
        assert c1.to_json_bytes() == c2.to_json_bytes()


def test_pinned_default_scheme_vector(scheme):
    """Bit-pinned vector for the default configuration: same claims and seed
    must serialize and sign identically forever."""
    token = issue_token(make_claims(), scheme)
    assert token.compact == (
        "eyJhbGciOiJFZERTQSIsImtpZCI6IlZrZGFwMVJqUjB3In0."
        "eyJhdWQiOiJjbGllbnQtMSIsImV4cCI6MTcwMDAwMDMwMCwiaWF0IjoxNzAwMDAwMDAwLCJpc3MiOiJodHRwczovL2lkcC50ZXN0Iiwibm9uY2UiOiJuLWFiYyIsInN1YiI6InN1YmplY3QtMSJ9."
        "mF3BoHEzNGN95PfV5JIPAzOAS3C0YxNqGuGNfcuQi6HiM71obPPqaOVdlNUWCsLbfeH9qaSEOvI4Y_dyKolnAA"
    )
    # and issuance is deterministic
    assert issue_token(make_claims(), scheme).compact == token.compact


def test_jwk_round_trip(scheme):
    jwk = scheme.verification_key.to_jwk()
    restored = VerificationKey.from_jwk(jwk)
    token = issue_token(make_claims(), scheme)
    assert verify_token(token.compact, restored, NOW)
