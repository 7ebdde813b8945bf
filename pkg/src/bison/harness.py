"""Adversary scenarios, distribution checks, and the derivation benchmark.

Attacks run in-process but against real service instances on loopback
ports, through the same HTTP surface a browser would use; a scenario that
authenticates successfully is a failed test. The benchmark times the full
derivation (blind, evaluate, verification blind, unblind, plus the four
counted hash evaluations) and asserts the operation counts are exact.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from . import core
from .agent import Agent
from .flows import HeadlessDevice
from .group import Group, TestGroup, count_ops, get_group
from .idp import IdentityProvider, demo_user_table
from .servers import (
    fetch_discovery,
    start_idp_server,
    start_sp_server,
    verification_key_from_discovery,
)
from .sp import ServiceProvider, expected_nonce_binding
from .token import IdTokenClaims, Ed25519Scheme, issue_token, verify_token

__all__ = [
    "SpConfig",
    "Deployment",
    "AttackScenario",
    "AttackResult",
    "run_replay_attack",
    "run_mitm_attack",
    "run_sybil_attempt",
    "run_double_redemption_race",
    "run_uniformity_test",
    "run_benchmark",
    "all_attacks",
    "BenchReport",
    "UniformityReport",
    "CHI_SQUARE_Q999_9DOF",
]

# 0.999 quantile of the chi-square distribution with 9 degrees of freedom
# (significance 0.001); table value, cross-checked against scipy in tests.
CHI_SQUARE_Q999_9DOF = 27.877164871256568


# ---------------------------------------------------------------------------
# loopback deployment


@dataclass(frozen=True)
class SpConfig:
    name: str = "sp"
    origin_host: Optional[str] = None  # logical hostname; None = raw loopback address
    audience: Optional[str] = None  # None = origin host
    bison: bool = True
    provider_samples_blind: bool = False


class Deployment:
    """An identity provider plus one or more service providers on loopback."""

    def __init__(self, group: Optional[Group] = None,
                 sp_configs: tuple[SpConfig, ...] = (SpConfig(),)):
        self.group = group or get_group("ristretto255")
        self._servers = []

        idp_server, self.idp = start_idp_server(
            lambda issuer: IdentityProvider(issuer, self.group, users=demo_user_table())
        )
        self._servers.append(idp_server)
        self.idp_url = idp_server.base_url

        discovery = fetch_discovery(self.idp_url)
        idp_key = verification_key_from_discovery(discovery)
        endpoint = discovery["authorization_endpoint"]

        self.sps: dict[str, ServiceProvider] = {}
        self.sp_urls: dict[str, str] = {}
        self.host_map: dict[str, str] = {}
        for config in sp_configs:
            server, sp = start_sp_server(
                lambda origin, c=config: ServiceProvider(
                    origin,
                    self.group,
                    idp_issuer=discovery["issuer"],
                    idp_key=idp_key,
                    audience=c.audience,
                    bison_enabled=c.bison,
                    provider_samples_blind=c.provider_samples_blind,
                ),
                authorization_endpoint=endpoint,
                origin_host=config.origin_host,
            )
            self._servers.append(server)
            self.sps[config.name] = sp
            self.sp_urls[config.name] = sp.origin
            if config.origin_host:
                self.host_map[config.origin_host] = server.host
            # ordinary OIDC deployments register their clients; blinded mode
            # never consults this
            self.idp.registered_clients[sp.origin] = [f"{sp.origin}/return"]

    @property
    def sp(self) -> ServiceProvider:
        return next(iter(self.sps.values()))

    @property
    def sp_url(self) -> str:
        return next(iter(self.sp_urls.values()))

    def device(self, with_agent: bool = True, consent: bool = True,
               extra_hosts: Optional[dict[str, str]] = None) -> HeadlessDevice:
        agent = Agent(self.group, consent=consent) if with_agent else None
        host_map = dict(self.host_map)
        if extra_hosts:
            host_map.update(extra_hosts)
        return HeadlessDevice(agent=agent, host_map=host_map)

    def close(self) -> None:
        for server in self._servers:
            server.close()

    def __enter__(self) -> "Deployment":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


# ---------------------------------------------------------------------------
# attack scenarios


@dataclass(frozen=True)
class AttackScenario:
    name: str
    description: str
    expected_outcome: str  # rejection class, or a stability condition


@dataclass
class AttackResult:
    scenario: AttackScenario
    outcome: str
    ok: bool
    detail: str = ""

    def to_mapping(self) -> dict:
        return {
            "name": self.scenario.name,
            "description": self.scenario.description,
            "expected": self.scenario.expected_outcome,
            "outcome": self.outcome,
            "ok": self.ok,
            "detail": self.detail,
        }


def _result(scenario: AttackScenario, outcome: str, detail: str = "") -> AttackResult:
    return AttackResult(scenario, outcome, ok=(outcome == scenario.expected_outcome), detail=detail)


def _different_blind(group: Group, used: Optional[str]) -> str:
    """A valid blind distinct from the one actually used (small groups collide)."""
    while True:
        candidate = group.scalar_to_b64(group.random_scalar())
        if candidate != used:
            return candidate


def run_replay_attack(group: Optional[Group] = None) -> list[AttackResult]:
    """Token reuse in its three shapes: straight replay, replay against a
    fresh authentication, and replay with a re-randomized blind."""
    results = []
    with Deployment(group) as dep, dep.device() as device:
        honest = device.run_flow(dep.sp_url, "alice")
        assert honest.ok and honest.derivation_mode == "bison", honest

        scenario = AttackScenario(
            "replay", "resubmit the captured token and blind to the same authentication",
            "ReplayDetected",
        )
        replayed = device.post_return(dep.sp_url, honest.id_token, honest.blind)
        results.append(_result(scenario, replayed.error or "success", f"status {replayed.status}"))

        scenario = AttackScenario(
            "replay-cross-pending",
            "start a fresh authentication, then present the captured token and blind",
            "NonceBindingMismatch",
        )
        device.start_only(dep.sp_url)  # fresh pending, fresh cookie
        cross = device.post_return(dep.sp_url, honest.id_token, honest.blind)
        results.append(_result(scenario, cross.error or "success", f"status {cross.status}"))

        scenario = AttackScenario(
            "replay-rerandomized-blind",
            "resubmit the captured token with a different (valid) blind",
            "BlindMismatch",
        )
        fresh = device.run_flow(dep.sp_url, "alice")  # align cookie with a consumed pending
        forged = device.post_return(dep.sp_url, fresh.id_token,
                                    _different_blind(dep.group, fresh.blind))
        results.append(_result(scenario, forged.error or "success", f"status {forged.status}"))
    return results


def run_mitm_attack(group: Optional[Group] = None) -> list[AttackResult]:
    """A relay page on another origin forwards a genuine request within the
    same audience; the origin-bound nonce hash is what catches it."""
    config = SpConfig(name="genuine", origin_host="login.shop.localhost", audience="shop.localhost")
    results = []
    with Deployment(group, sp_configs=(config,)) as dep:
        attacker_hosts = {"evil.shop.localhost": "127.0.0.1", "unrelated.localhost": "127.0.0.1"}

        scenario = AttackScenario(
            "mitm-control", "no interposition: user really is on the genuine origin", "success"
        )
        with dep.device() as device:
            control = device.run_flow(dep.sp_url, "alice")
        results.append(_result(
            scenario, "success" if control.ok and control.derivation_mode == "bison"
            else (control.error or "failed"),
        ))

        scenario = AttackScenario(
            "mitm-same-audience",
            "attacker origin inside the audience scope relays request and response unchanged",
            "NonceBindingMismatch",
        )
        with dep.device(extra_hosts=attacker_hosts) as device:
            attacked = device.run_flow(
                dep.sp_url, "alice",
                page_origin=f"http://evil.shop.localhost:{dep.sp_url.rsplit(':', 1)[1]}",
            )
        results.append(_result(scenario, attacked.error or "success", f"status {attacked.status}"))

        scenario = AttackScenario(
            "mitm-unauthorized-audience",
            "attacker origin outside the audience scope: the agent must refuse to blind",
            "rewrite-refused",
        )
        with dep.device(extra_hosts=attacker_hosts) as device:
            refused = device.run_flow(
                dep.sp_url, "alice",
                page_origin=f"http://unrelated.localhost:{dep.sp_url.rsplit(':', 1)[1]}",
            )
        outcome = "rewrite-refused" if refused.rewritten_client_id is None else "rewritten"
        results.append(_result(scenario, outcome, f"mode {refused.derivation_mode}"))
    return results


def run_sybil_attempt(group: Optional[Group] = None, flows: int = 20) -> list[AttackResult]:
    """One account, one audience: every completed flow must mint the same
    pseudonym, doctored blinds must be rejected, suspension must bite."""
    results = []
    with Deployment(group) as dep:
        scenario = AttackScenario(
            "sybil-stability",
            f"{flows} flows with fresh blinds must yield exactly one distinct pseudonym",
            "single-pseudonym",
        )
        pseudonyms = set()
        for _ in range(flows):
            with dep.device() as device:
                outcome = device.run_flow(dep.sp_url, "alice")
            assert outcome.ok, outcome
            pseudonyms.add(outcome.pseudonym)
        results.append(_result(
            scenario,
            "single-pseudonym" if len(pseudonyms) == 1 else f"{len(pseudonyms)}-pseudonyms",
        ))

        scenario = AttackScenario(
            "sybil-forged-blind",
            "submit a blind other than the one used, hoping for a second identity",
            "BlindMismatch",
        )
        with dep.device() as device:
            forged = device.run_flow(
                dep.sp_url, "alice",
                tamper_return=lambda fields: dict(
                    fields, blind=_different_blind(dep.group, fields.get("blind"))),
            )
        results.append(_result(scenario, forged.error or "success", f"status {forged.status}"))

        scenario = AttackScenario(
            "sybil-suspended-account",
            "authentication with a suspended account must be refused upstream",
            "SuspendedAccount",
        )
        dep.idp.users.get("alice").suspended = True
        try:
            with dep.device() as device:
                suspended = device.run_flow(dep.sp_url, "alice")
        finally:
            dep.idp.users.get("alice").suspended = False
        results.append(_result(scenario, suspended.error or "success", f"status {suspended.status}"))
    return results


def run_double_redemption_race(group: Optional[Group] = None, attempts: int = 16) -> list[AttackResult]:
    """N concurrent completions of one authentication: exactly one may win."""
    scenario = AttackScenario(
        "double-redemption-race",
        f"{attempts} concurrent submissions of one valid response",
        "exactly-one-success",
    )
    with Deployment(group) as dep, dep.device() as device:
        # capture a valid (token, blind) pair without letting the flow finish
        captured = {}

        def capture(fields):
            captured.update(fields)
            return fields

        outcome = device.run_flow(dep.sp_url, "alice", tamper_return=capture)
        assert outcome.ok, outcome
        # rewind: a fresh pending for the same device cookie, new flow, but
        # we stop before completion and fire N completions in parallel
        second = device.run_flow(dep.sp_url, "alice", tamper_return=capture, defer_return=True)
        assert second is None

        def attempt(_):
            result = device.post_return(dep.sp_url, captured["id_token"], captured.get("blind"))
            return result.ok

        with ThreadPoolExecutor(max_workers=attempts) as pool:
            outcomes = list(pool.map(attempt, range(attempts)))
        successes = sum(outcomes)
    return [_result(
        scenario,
        "exactly-one-success" if successes == 1 else f"{successes}-successes",
        f"{attempts} attempts",
    )]


def all_attacks(group: Optional[Group] = None) -> list[AttackResult]:
    results = []
    results += run_replay_attack(group)
    results += run_mitm_attack(group)
    results += run_sybil_attempt(group)
    results += run_double_redemption_race(group)
    return results


# ---------------------------------------------------------------------------
# distribution of the blinded transmission


@dataclass
class UniformityReport:
    audiences: tuple[str, str]
    exhaustive_flat: bool
    exhaustive_identical: bool
    trials: int
    statistics: tuple[float, float]
    threshold: float
    randomized_pass: bool

    def to_mapping(self) -> dict:
        return {
            "audiences": list(self.audiences),
            "exhaustive_flat": self.exhaustive_flat,
            "exhaustive_identical": self.exhaustive_identical,
            "trials": self.trials,
            "chi_square_statistics": list(self.statistics),
            "chi_square_threshold": self.threshold,
            "randomized_pass": self.randomized_pass,
        }

    @property
    def ok(self) -> bool:
        return self.exhaustive_flat and self.exhaustive_identical and self.randomized_pass


def run_uniformity_test(trials: int = 10_000, seed: int = 0x0B15,
                        audiences: tuple[str, str] = ("example.com", "other.com")) -> UniformityReport:
    """What the identity provider sees is uniform, whatever the audience.

    Exhaustive mode enumerates every blind in the small test group: each
    non-identity element must be transmitted exactly once per audience, and
    the two audiences' histograms must coincide. Randomized mode draws
    blinds with a fixed seed and applies a chi-square goodness-of-fit test
    against uniform at significance 0.001.
    """
    tg = get_group("testgroup")
    assert isinstance(tg, TestGroup)
    elements = tg.non_identity_elements()
    auds = [core.AudienceId.from_audience(tg, a) for a in audiences]

    exhaustive = []
    for aud in auds:
        histogram = {x: 0 for x in elements}
        for s in tg.nonzero_scalars():
            histogram[core.blind(aud, s)] += 1
        exhaustive.append(histogram)
    flat = all(set(h.values()) == {1} for h in exhaustive)
    identical = exhaustive[0] == exhaustive[1]

    rng = random.Random(seed)
    statistics = []
    expected = trials / len(elements)
    for aud in auds:
        histogram = {x: 0 for x in elements}
        for _ in range(trials):
            histogram[core.blind(aud, tg.random_scalar(rng))] += 1
        statistics.append(sum((n - expected) ** 2 / expected for n in histogram.values()))

    return UniformityReport(
        audiences=audiences,
        exhaustive_flat=flat,
        exhaustive_identical=identical,
        trials=trials,
        statistics=(statistics[0], statistics[1]),
        threshold=CHI_SQUARE_Q999_9DOF,
        randomized_pass=all(s < CHI_SQUARE_Q999_9DOF for s in statistics),
    )


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class BenchReport:
    mean_derivation_micros: float
    scalar_mults: int
    hash_evals: int
    iterations: int
    group: str
    retained_state: int = 0

    def validate(self) -> None:
        if self.scalar_mults != 4 * self.iterations:
            raise AssertionError(
                f"expected exactly 4 scalar mults per iteration, measured "
                f"{self.scalar_mults}/{self.iterations}")
        if self.hash_evals != 4 * self.iterations:
            raise AssertionError(
                f"expected exactly 4 hash evaluations per iteration, measured "
                f"{self.hash_evals}/{self.iterations}")

    def to_mapping(self) -> dict:
        return {
            "group": self.group,
            "iterations": self.iterations,
            "mean_derivation_micros": round(self.mean_derivation_micros, 3),
            "scalar_mults_per_iteration": self.scalar_mults / self.iterations,
            "hash_evals_per_iteration": self.hash_evals / self.iterations,
            "retained_state": self.retained_state,
        }


def derive_once(group: Group, user_id, audience: bytes, origin: str, nonce: str,
                signing_key: Ed25519Scheme, now: int) -> core.Pseudonym:
    """One full derivation: 4 scalar multiplications, 4 hash evaluations.

    Hash attribution, documented rather than asserted as canonical:
    hash-to-group of the audience, the origin-nonce binding, and the message
    digests of token signing and verification.
    """
    r = group.random_scalar()
    aud = core.AudienceId.from_audience(group, audience)          # hash 1
    blinded = core.blind(aud, r)                                  # mult 1
    evaluated = core.blind_eval(blinded, user_id)                 # mult 2
    binding = expected_nonce_binding(origin, nonce)               # hash 2
    claims = IdTokenClaims(
        iss="https://bench.invalid",
        aud=group.element_to_b64(blinded),
        sub=group.element_to_b64(evaluated),
        nonce=binding,
        iat=now,
        exp=now + 300,
        pairwise_subject_type="bison",
    )
    token = issue_token(claims, signing_key, group=group)         # hash 3
    recovered = verify_token(token.compact, signing_key.verification_key,
                             now, group=group)                    # hash 4
    if not core.verify_blind(aud, r, group.element_from_b64(recovered.aud)):  # mult 3
        raise AssertionError("verification blind failed in benchmark")
    return core.unblind(group.element_from_b64(recovered.sub), r)  # mult 4


def run_benchmark(iterations: int = 10_000, group: Optional[Group] = None) -> BenchReport:
    from . import group as group_module

    group = group or get_group("ristretto255")
    signing_key = Ed25519Scheme.generate()
    user_id = group.hash_to_scalar(b"benchmark-user-seed")
    now = int(time.time())
    reference = None

    derive_once(group, user_id, b"bench.example", "https://bench.example", "nonce", signing_key, now)
    caches_before = len(group_module._DEFAULT_GROUPS)

    with count_ops() as ops:
        start = time.perf_counter()
        for _ in range(iterations):
            pseudonym = derive_once(group, user_id, b"bench.example",
                                    "https://bench.example", "nonce", signing_key, now)
            if reference is None:
                reference = pseudonym.encoded
            elif pseudonym.encoded != reference:  # blind-independence, every iteration
                raise AssertionError("derivation output changed between iterations")
        elapsed = time.perf_counter() - start

    report = BenchReport(
        mean_derivation_micros=elapsed / iterations * 1e6,
        scalar_mults=ops.scalar_mults,
        hash_evals=ops.hash_evals,
        iterations=iterations,
        group=group.descriptor.name,
        # nothing may accumulate across iterations: the only module-level
        # cache is the backend registry, and no counting scope may linger
        retained_state=(len(group_module._DEFAULT_GROUPS) - caches_before)
        + (1 if group_module._active_counter.get() is not None else 0),
    )
    report.validate()
    return report
