"""Command-line entry points: demo services, one-shot flows, attacks, benchmarks."""

from __future__ import annotations

import json
import sys
import time

import click

from .flows import HeadlessDevice, user_side_check
from .group import get_group
from .harness import (
    Deployment,
    SpConfig,
    all_attacks,
    run_benchmark,
    run_double_redemption_race,
    run_mitm_attack,
    run_replay_attack,
    run_sybil_attempt,
    run_uniformity_test,
)
from .proxy import AgentProxy
from .agent import Agent

_BACKENDS = {"curve": "ristretto255", "testgroup": "testgroup"}

_ATTACKS = {
    "replay": run_replay_attack,
    "mitm": run_mitm_attack,
    "sybil": run_sybil_attempt,
    "race": run_double_redemption_race,
}


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2))


def _backend(name: str):
    return get_group(_BACKENDS[name])


@click.group()
def main() -> None:
    """Scoped-pseudonym single sign-on demonstrator."""


@main.command()
@click.option("--backend", type=click.Choice(sorted(_BACKENDS)), default="curve")
@click.option("--audience", default=None, help="Pseudonym scope of the demo service provider.")
@click.option("--with-proxy/--no-proxy", default=True,
              help="Also run the intercepting proxy for browser use.")
@click.option("--json", "as_json", is_flag=True, help="Print endpoints as JSON and keep serving.")
def demo(backend: str, audience: str | None, with_proxy: bool, as_json: bool) -> None:
    """Launch the identity provider, a service provider, and the agent proxy."""
    group = _backend(backend)
    with Deployment(group, sp_configs=(SpConfig(audience=audience),)) as dep:
        endpoints = {"idp": dep.idp_url, "sp": dep.sp_url, "accounts": dep.idp.users.labels()}
        proxy = None
        if with_proxy:
            def consent_prompt(origin: str, aud: str) -> bool:
                if as_json:
                    return True
                return click.confirm(
                    f"Blind the login on {origin} for pseudonym scope {aud!r}?", default=True
                )

            agent = Agent(group, consent=consent_prompt)
            discovery_endpoint = f"{dep.idp_url}/login"
            proxy = AgentProxy(agent, discovery_endpoint,
                               log=None if as_json else lambda line: click.echo(f"[agent] {line}"))
            proxy.start()
            endpoints["proxy"] = proxy.proxy_url
        try:
            if as_json:
                _echo_json(endpoints)
                sys.stdout.flush()
            else:
                click.echo(f"identity provider : {endpoints['idp']}")
                click.echo(f"service provider  : {endpoints['sp']}")
                if proxy:
                    click.echo(f"agent proxy       : {endpoints['proxy']}")
                    click.echo("Configure your browser to use the proxy, then open the")
                    click.echo("service provider URL. Without the proxy (or the browser")
                    click.echo("extension) the flow falls back to plain OIDC.")
                click.echo(f"accounts          : {', '.join(endpoints['accounts'])}")
                click.echo("Ctrl-C to stop.")
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            pass
        finally:
            if proxy:
                proxy.close()


@main.command()
@click.option("--account", default="alice", show_default=True)
@click.option("--audience", default=None, help="Audience scope (defaults to the provider's host).")
@click.option("--backend", type=click.Choice(sorted(_BACKENDS)), default="curve")
@click.option("--no-agent", is_flag=True, help="Drive an unaware device (plain OIDC fallback).")
@click.option("--sp", "sp_url", default=None, help="Target a running service provider instead.")
@click.option("--json", "as_json", is_flag=True)
def flow(account: str, audience: str | None, backend: str, no_agent: bool,
         sp_url: str | None, as_json: bool) -> None:
    """Run one headless authentication and print the resulting pseudonym."""
    group = _backend(backend)

    def drive(url: str, deployment: Deployment | None) -> None:
        if deployment is not None:
            device = deployment.device(with_agent=not no_agent)
        else:
            device = HeadlessDevice(agent=None if no_agent else Agent(group))
        with device:
            outcome = device.run_flow(url, account)
        if as_json:
            _echo_json(outcome.to_mapping())
        else:
            if outcome.ok:
                click.echo(f"mode      : {outcome.derivation_mode}")
                click.echo(f"audience  : {outcome.audience}")
                click.echo(f"pseudonym : {outcome.pseudonym}")
            else:
                click.echo(f"failed ({outcome.status}): {outcome.error}")
        sys.exit(0 if outcome.ok else 1)

    if sp_url:
        drive(sp_url, None)
    else:
        configs = (SpConfig(origin_host=audience, audience=audience),) if audience else (SpConfig(),)
        with Deployment(group, sp_configs=configs) as dep:
            drive(dep.sp_url, dep)


@main.command()
@click.argument("name", type=click.Choice(sorted(_ATTACKS) + ["all"]), default="all")
@click.option("--backend", type=click.Choice(sorted(_BACKENDS)), default="curve")
@click.option("--json", "as_json", is_flag=True)
def attack(name: str, backend: str, as_json: bool) -> None:
    """Run adversary scenarios; every one must end in its declared rejection."""
    group = _backend(backend)
    runner = all_attacks if name == "all" else _ATTACKS[name]
    results = runner(group)
    if as_json:
        _echo_json([r.to_mapping() for r in results])
    else:
        for r in results:
            marker = "ok " if r.ok else "FAIL"
            click.echo(f"[{marker}] {r.scenario.name}: {r.outcome} "
                       f"(expected {r.scenario.expected_outcome})")
    sys.exit(0 if all(r.ok for r in results) else 1)


@main.command()
@click.option("--iterations", default=10_000, show_default=True)
@click.option("--backend", type=click.Choice(sorted(_BACKENDS)), default="curve")
@click.option("--json", "as_json", is_flag=True)
def bench(iterations: int, backend: str, as_json: bool) -> None:
    """Time the full derivation and verify the operation counts are exact."""
    report = run_benchmark(iterations, _backend(backend))
    if as_json:
        _echo_json(report.to_mapping())
    else:
        click.echo(f"group        : {report.group}")
        click.echo(f"iterations   : {report.iterations}")
        click.echo(f"mean         : {report.mean_derivation_micros / 1000:.3f} ms")
        click.echo(f"scalar mults : {report.scalar_mults // report.iterations} per derivation")
        click.echo(f"hash evals   : {report.hash_evals // report.iterations} per derivation")


@main.command()
@click.option("--trials", default=10_000, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def uniformity(trials: int, as_json: bool) -> None:
    """Distribution check: the blinded transmission is audience-independent."""
    report = run_uniformity_test(trials)
    if as_json:
        _echo_json(report.to_mapping())
    else:
        click.echo(f"exhaustive histograms flat      : {report.exhaustive_flat}")
        click.echo(f"exhaustive histograms identical : {report.exhaustive_identical}")
        click.echo(f"chi-square ({report.trials} trials)    : "
                   f"{report.statistics[0]:.2f}, {report.statistics[1]:.2f} "
                   f"< {report.threshold:.2f}: {report.randomized_pass}")
    sys.exit(0 if report.ok else 1)


@main.command()
@click.option("--account", default="alice", show_default=True)
@click.option("--backend", type=click.Choice(sorted(_BACKENDS)), default="curve")
@click.option("--json", "as_json", is_flag=True)
def selfcheck(account: str, backend: str, as_json: bool) -> None:
    """User-side verification that the returned tuple derives the shown pseudonym."""
    group = _backend(backend)
    with Deployment(group) as dep:
        with dep.device() as device:
            first = device.run_flow(dep.sp_url, account)
        with dep.device() as device:  # a fresh device, as a returning user would have
            second = device.run_flow(dep.sp_url, account)
        check = user_side_check(second, group, remembered_pseudonym=first.pseudonym)
    if as_json:
        _echo_json(check)
    else:
        click.echo(f"tuple consistent with blind : {check['blind_consistent']}")
        click.echo(f"derived pseudonym           : {check['derived_pseudonym']}")
        click.echo(f"matches provider result     : {check['matches_provider']}")
        click.echo(f"matches remembered value    : {check['matches_remembered']}")
    sys.exit(0 if check["blind_consistent"] and check["matches_provider"]
             and check["matches_remembered"] else 1)


if __name__ == "__main__":
    main()
