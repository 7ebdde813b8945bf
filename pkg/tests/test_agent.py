"""User agent: audience authorization, the rewrite contract, the return leg."""

import json
import time
from pathlib import Path

import pytest

from bison.agent import (
    Agent,
    ConsentDenied,
    OriginContext,
    StaleRecord,
    UnknownReturn,
)
from bison.sp import expected_nonce_binding
from bison.wire import AuthorizationRequest, CONSTANT_REDIRECT_TARGET
from util import all_audiences, aud_for_element

VECTORS = json.loads(
    (Path(__file__).resolve().parent.parent / "testvectors" / "rewrite_vectors.json").read_text()
)


def sp_request(client_id="https://login.example.com", audience_id=None, nonce="sp-nonce-1",
               blind_param=None, opt_in=True):
    return AuthorizationRequest(
        client_id=client_id,
        redirect_uri=f"{client_id}/return",
        nonce=nonce,
        pairwise_subject_types=("bison",) if opt_in else (),
        audience_id=audience_id,
        blind=blind_param,
    )


def secure(origin):
    return OriginContext(current_origin=origin, is_secure_context=True)


@pytest.fixture()
def agent(tg):
    return Agent(tg, consent=True)


# ---------------------------------------------------------------------------
# audience authorization


def test_authorize_audience_registrable_suffix(agent):
    ctx = OriginContext.for_page("https://login.example.com")
    assert agent.authorize_audience("example.com", ctx)
    assert agent.authorize_audience("login.example.com", ctx)
    assert not agent.authorize_audience("com", ctx)
    assert not agent.authorize_audience("unrelated.com", ctx)


def test_authorize_audience_requires_secure_context(agent):
    insecure = OriginContext(current_origin="http://login.example.com", is_secure_context=False)
    assert not agent.authorize_audience("example.com", insecure)


def test_origin_context_secure_detection():
    assert OriginContext.for_page("https://login.example.com").is_secure_context
    assert OriginContext.for_page("http://127.0.0.1:8080").is_secure_context
    assert OriginContext.for_page("http://login.sp.localhost:8402").is_secure_context
    assert not OriginContext.for_page("http://login.example.com").is_secure_context


# ---------------------------------------------------------------------------
# rewrite contract


def test_rewrite_pass_through_without_opt_in(agent):
    request = sp_request(opt_in=False)
    result = agent.rewrite_request(request, secure("https://login.example.com"))
    assert not result.modified
    assert result.request is request
    assert agent.in_flight() == 0


def test_rewrite_pass_through_insecure_context(agent):
    request = sp_request()
    insecure = OriginContext("http://login.example.com", is_secure_context=False)
    result = agent.rewrite_request(request, insecure)
    assert not result.modified


def test_rewrite_pass_through_unauthorized_audience(agent):
    request = sp_request(audience_id="unrelated.com")
    result = agent.rewrite_request(request, secure("https://login.example.com"))
    assert not result.modified


def test_consent_denial_aborts(tg):
    agent = Agent(tg, consent=False)
    with pytest.raises(ConsentDenied):
        agent.rewrite_request(sp_request(), secure("https://login.example.com"))
    assert agent.in_flight() == 0


def test_consent_callback_receives_origin_and_audience(tg):
    seen = {}

    def consent(origin, audience):
        seen["origin"], seen["audience"] = origin, audience
        return True

    agent = Agent(tg, consent=consent)
    agent.rewrite_request(sp_request(audience_id="example.com"),
                          secure("https://login.example.com"))
    assert seen == {"origin": "https://login.example.com", "audience": "example.com"}


def test_rewrite_strips_identifying_parameters(agent, tg):
    request = sp_request(audience_id="example.com",
                         blind_param=tg.scalar_to_b64(tg.scalar(5)))
    request = request.with_(extra={"state": "opaque-sp-state", "login_hint": "alice@example.com"})
    result = agent.rewrite_request(request, secure("https://login.example.com"))
    assert result.modified
    query = result.request.to_query()
    for leaked in ("login.example.com", "opaque-sp-state", "login_hint", "audience_id",
                   "state=", request.redirect_uri, request.nonce):
        assert leaked not in query
    assert result.request.redirect_uri == CONSTANT_REDIRECT_TARGET
    assert result.request.pairwise_subject_type == "bison"
    assert result.request.pairwise_subject_types == ()


def test_rewrite_client_id_oracle(agent, tg):
    """Audience hashing to 4, r=3: the rewritten client identifier encodes 18."""
    audience = aud_for_element(tg, 4).source_audience.decode()
    request = sp_request(audience_id=audience)
    result = agent.rewrite_request(request, secure(f"https://{audience}"),
                                   blind=tg.scalar(3))
    assert result.modified
    assert tg.element_value(tg.element_from_b64(result.request.client_id)) == 18


def test_rewrite_nonce_binding(agent, tg):
    request = sp_request(nonce="sp-chosen-nonce")
    result = agent.rewrite_request(request, secure("https://login.example.com"))
    assert result.request.nonce == expected_nonce_binding("https://login.example.com",
                                                          "sp-chosen-nonce")


def test_rewrites_use_fresh_blinds(rg):
    # on the production group distinct blinds mean distinct identifiers;
    # the 10-element test group would collide by the birthday bound
    agent = Agent(rg, consent=True)
    request = sp_request()
    ctx = secure("https://login.example.com")
    ids = {agent.rewrite_request(request, ctx).request.client_id for _ in range(10)}
    assert len(ids) == 10


def test_rewrite_honors_provider_chosen_blind(agent, tg):
    supplied = tg.scalar(7)
    request = sp_request(blind_param=tg.scalar_to_b64(supplied))
    result = agent.rewrite_request(request, secure("https://login.example.com"))
    assert result.record.blind == supplied


def test_rewrite_shared_vectors(rg):
    """The frozen cross-implementation vectors; the browser agent runs the same file."""
    agent = Agent(rg, consent=True)
    for vector in VECTORS["vectors"]:
        request = sp_request(client_id=vector["origin"], audience_id=vector["audience"],
                             nonce=vector["nonce"])
        result = agent.rewrite_request(request, secure(vector["origin"]),
                                       blind=rg.scalar_from_b64(vector["r"]))
        assert result.modified, vector
        assert result.request.client_id == vector["expected_client_id"]
        assert result.request.nonce == vector["expected_nonce_binding"]
        assert result.request.redirect_uri == CONSTANT_REDIRECT_TARGET


# ---------------------------------------------------------------------------
# return leg


def returned(agent, tg, **kwargs):
    request = sp_request(**kwargs)
    result = agent.rewrite_request(request, secure("https://login.example.com"))
    return request, result


def test_handle_return_round_trip(agent, tg):
    request, result = returned(agent, tg)
    forwarded = agent.handle_return(CONSTANT_REDIRECT_TARGET, "tok.en.value", result.record)
    assert forwarded.url == request.redirect_uri
    assert forwarded.fields["id_token"] == "tok.en.value"
    assert tg.scalar_from_b64(forwarded.fields["blind"]) == result.record.blind
    assert agent.in_flight() == 0


def test_handle_return_destroys_record(agent, tg):
    _, result = returned(agent, tg)
    agent.handle_return(CONSTANT_REDIRECT_TARGET, "t", result.record)
    with pytest.raises(UnknownReturn):
        agent.handle_return(CONSTANT_REDIRECT_TARGET, "t", result.record)


def test_handle_return_wrong_target(agent, tg):
    _, result = returned(agent, tg)
    with pytest.raises(UnknownReturn):
        agent.handle_return("https://somewhere.else/path", "t", result.record)
    # the record survives a mismatched target and the real return still works
    assert agent.handle_return(CONSTANT_REDIRECT_TARGET, "t", result.record)


def test_handle_return_stale_record(tg):
    agent = Agent(tg, consent=True, record_ttl=0.0)
    _, result = returned(agent, tg)
    time.sleep(0.01)
    with pytest.raises(StaleRecord):
        agent.handle_return(CONSTANT_REDIRECT_TARGET, "t", result.record)


def test_unknown_handle(agent):
    with pytest.raises(UnknownReturn):
        agent.handle_return(CONSTANT_REDIRECT_TARGET, "t", "no-such-handle")


# ---------------------------------------------------------------------------
# information confinement


def test_transmitted_element_distribution_audience_independent(tg):
    """Over all blinds, the rewritten identifier hits every element once,
    identically for every audience: the provider-bound message carries no
    information about where the user is logging in."""
    agent = Agent(tg, consent=True)
    histograms = []
    for aud in all_audiences(tg)[:4]:
        audience = aud.source_audience.decode()
        seen = []
        for r in range(1, 11):
            request = sp_request(audience_id=audience)
            result = agent.rewrite_request(request, secure(f"https://{audience}"),
                                           blind=tg.scalar(r))
            seen.append(tg.element_from_b64(result.request.client_id))
        histograms.append(sorted(tg.element_value(x) for x in seen))
    assert all(h == histograms[0] for h in histograms)
    assert histograms[0] == sorted(tg.element_value(x) for x in tg.non_identity_elements())


def test_no_rewrite_without_consent_input(tg):
    calls = []

    def consent(origin, audience):
        calls.append((origin, audience))
        return False

    agent = Agent(tg, consent=consent)
    with pytest.raises(ConsentDenied):
        agent.rewrite_request(sp_request(), secure("https://login.example.com"))
    assert calls, "consent callback must be consulted"
