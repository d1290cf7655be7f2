"""Operator CLI: boot and seed a system, run the server, inject failures,
drive the clock, generate workloads, and verify replay.

Every subcommand except ``init`` and ``verify-replay`` is a thin client of
the wire API: pass ``--url`` (or set CAMPUSCLOUD_URL) to talk to a running
server, or ``--data`` (CAMPUSCLOUD_DATA) to open the data directory and
route through the same ASGI app in-process. Either way there is exactly one
mutation path - the gateway.
"""

from __future__ import annotations

import json
import random
import sys
from contextlib import contextmanager

import click
import httpx

from .config import SystemConfig
from .core import CloudError, ErrorCode
from .system import System, verify_replay
from .workload import WorkloadRunner, WorkloadSpec

DEFAULT_PORT = 8420

CLIENT_ERRORS = (CloudError, httpx.HTTPError)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _fail_on(err: Exception) -> None:
    if isinstance(err, CloudError):
        _fail(f"{err.code.value}: {err.message}")
    _fail(f"cannot reach server: {err}")


@contextmanager
def open_client(data: str | None, url: str | None):
    """An httpx-compatible client for the gateway, remote or in-process."""
    if url:
        with httpx.Client(base_url=url, timeout=60.0) as client:
            yield client
        return
    if not data:
        _fail("need --data (or CAMPUSCLOUD_DATA) or --url (or CAMPUSCLOUD_URL)")
    from fastapi.testclient import TestClient

    from .gateway import create_app

    with System.open(data) as system:
        with TestClient(create_app(system), raise_server_exceptions=False) as client:
            yield client


def api(client, method: str, path: str, token: str | None = None, **kwargs) -> dict:
    headers = kwargs.pop("headers", {})
    if token:
        headers["Authorization"] = f"Bearer {token}"
    resp = client.request(method, path, headers=headers, **kwargs)
    body = resp.json()
    if resp.status_code >= 400:
        raise CloudError(ErrorCode(body["code"]), body["message"])
    return body


def _admin_login(client, user: str, secret: str) -> str:
    return api(client, "POST", "/api/v1/login", json={"secret": secret, "user_id": user})["token"]


def _client_options(fn):
    fn = click.option("--data", envvar="CAMPUSCLOUD_DATA", default=None,
                      help="Data directory (in-process mode).")(fn)
    fn = click.option("--url", envvar="CAMPUSCLOUD_URL", default=None,
                      help="Base URL of a running server.")(fn)
    fn = click.option("--admin-user", envvar="CAMPUSCLOUD_ADMIN_USER", default="admin")(fn)
    fn = click.option("--admin-secret", envvar="CAMPUSCLOUD_ADMIN_SECRET", default="admin")(fn)
    return fn


@click.group()
def main():
    """University cloud simulator."""


@main.command()
@click.option("--data", envvar="CAMPUSCLOUD_DATA", required=True)
@click.option("--nodes", default=4, show_default=True)
@click.option("--capacity", default=1 << 30, show_default=True, help="Per-node capacity in bytes.")
@click.option("--replication", default=2, show_default=True)
@click.option("--autoscale/--no-autoscale", default=False, show_default=True)
@click.option("--max-nodes", default=64, show_default=True)
@click.option("--rate", default=1, show_default=True, help="Micro-credits per MiB-tick.")
@click.option("--snapshot-interval", default=1000, show_default=True)
@click.option("--durability", default="fsync", type=click.Choice(["fsync", "flush", "none"]))
@click.option("--rng-seed", default=None, help="Hex seed for token/salt derivation.")
@click.option("--admin-user", default="admin", show_default=True)
@click.option("--admin-secret", default="admin", show_default=True)
def init(data, nodes, capacity, replication, autoscale, max_nodes, rate,
         snapshot_interval, durability, rng_seed, admin_user, admin_secret):
    """Create a data directory with an admin account and initial nodes."""
    try:
        config = SystemConfig(
            replication=replication,
            autoscale_enabled=autoscale,
            max_nodes=max_nodes,
            rate_micro_per_mib_tick=rate,
            snapshot_interval=snapshot_interval,
            durability=durability,
            rng_seed=rng_seed or "",
        )
        with System.create(data, config) as system:
            system.bootstrap_account(admin_user, ["Admin"], admin_secret)
            token = system.login(admin_user, admin_secret)["token"]
            for _ in range(nodes):
                node = system.add_node(token, capacity)
                click.echo(f"added node {node['node_id']} ({capacity} bytes)")
            system.logout(token)
            click.echo(f"initialized {data}: {nodes} nodes, R={replication}, "
                       f"autoscale={'on' if autoscale else 'off'}")
    except CloudError as err:
        _fail(f"{err.code.value}: {err.message}")


@main.command()
@click.option("--data", envvar="CAMPUSCLOUD_DATA", required=True)
@click.option("--port", envvar="CAMPUSCLOUD_PORT", default=DEFAULT_PORT, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui", default=None, help="Directory of built web UI files to serve at /.")
def serve(data, port, host, ui):
    """Run the wire API server over a data directory."""
    import uvicorn

    from .gateway import create_app

    with System.open(data) as system:
        app = create_app(system, ui_dir=ui)
        uvicorn.run(app, host=host, port=int(port), log_level="info")


@main.command()
@click.option("--students", default=10, show_default=True)
@click.option("--seed", default=1, show_default=True)
@_client_options
def seed(students, seed, data, url, admin_user, admin_secret):
    """Create a staff account plus student accounts and records."""
    rng = random.Random(seed)
    from .workload import FIRST_NAMES, PROGRAMS

    try:
        with open_client(data, url) as client:
            admin_token = _admin_login(client, admin_user, admin_secret)
            staff_user, staff_secret = "staff1", "pw-staff1"
            resp = client.request(
                "POST", "/api/v1/admin/accounts",
                headers={"Authorization": f"Bearer {admin_token}"},
                json={"roles": ["Staff"], "secret": staff_secret, "user_id": staff_user},
            )
            if resp.status_code not in (200, 409):
                _fail(resp.text)
            staff_token = api(client, "POST", "/api/v1/login",
                              json={"secret": staff_secret, "user_id": staff_user})["token"]
            created = 0
            for i in range(students):
                uid = f"s{1000 + i}"
                client.request(
                    "POST", "/api/v1/admin/accounts",
                    headers={"Authorization": f"Bearer {admin_token}"},
                    json={"roles": ["Student"], "secret": f"pw-{uid}", "user_id": uid},
                )
                record = {
                    "contact": f"{uid}@university.example",
                    "name": f"{rng.choice(FIRST_NAMES)} {rng.choice(FIRST_NAMES)}",
                    "program": rng.choice(PROGRAMS),
                    "user_id": uid,
                    "year": rng.randint(1, 5),
                }
                resp = client.request(
                    "POST", "/api/v1/students",
                    headers={"Authorization": f"Bearer {staff_token}"}, json=record,
                )
                if resp.status_code == 200:
                    created += 1
            click.echo(f"seeded {created} student records (staff account: {staff_user})")
    except CLIENT_ERRORS as err:
        _fail_on(err)


def _node_status_command(name: str, status: str, help_text: str):
    @main.command(name=name, help=help_text)
    @click.argument("node_id")
    @_client_options
    def cmd(node_id, data, url, admin_user, admin_secret):
        try:
            with open_client(data, url) as client:
                token = _admin_login(client, admin_user, admin_secret)
                out = api(client, "POST", f"/api/v1/admin/nodes/{node_id}/status",
                          token=token, json={"status": status})
                click.echo(f"{out['node_id']} -> {out['status']}")
        except CLIENT_ERRORS as err:
            _fail_on(err)

    return cmd


_node_status_command("fail-node", "Down", "Mark a storage node Down (fault injection).")
_node_status_command("recover-node", "Up", "Mark a storage node Up again.")


@main.command()
@click.option("--ticks", required=True, type=int)
@_client_options
def advance(ticks, data, url, admin_user, admin_secret):
    """Advance the logical clock, accruing usage per Up node per tick."""
    try:
        with open_client(data, url) as client:
            token = _admin_login(client, admin_user, admin_secret)
            out = api(client, "POST", "/api/v1/admin/clock/advance",
                      token=token, json={"ticks": ticks})
            click.echo(f"tick is now {out['tick']}")
    except CLIENT_ERRORS as err:
        _fail_on(err)


@main.command()
@_client_options
def rereplicate(data, url, admin_user, admin_secret):
    """Repair replica counts after failures or recoveries."""
    try:
        with open_client(data, url) as client:
            token = _admin_login(client, admin_user, admin_secret)
            out = api(client, "POST", "/api/v1/admin/rereplicate", token=token)
            click.echo(f"repaired={out['repaired']} trimmed={out['trimmed']} "
                       f"degraded={len(out['degraded'])}")
    except CLIENT_ERRORS as err:
        _fail_on(err)


@main.command()
@click.option("--from", "from_tick", required=True, type=int)
@click.option("--to", "to_tick", required=True, type=int)
@click.option("--full", is_flag=True, help="Print the full statement as JSON.")
@_client_options
def bill(from_tick, to_tick, full, data, url, admin_user, admin_secret):
    """Pay-per-use bill over [FROM, TO); prints total micro-credits."""
    try:
        with open_client(data, url) as client:
            token = _admin_login(client, admin_user, admin_secret)
            out = api(client, "GET", f"/api/v1/admin/bill?from={from_tick}&to={to_tick}",
                      token=token)
            if full:
                click.echo(json.dumps(out, indent=2, sort_keys=True))
            else:
                click.echo(str(out["total_micro_credits"]))
    except CLIENT_ERRORS as err:
        _fail_on(err)


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@_client_options
def workload(spec_path, data, url, admin_user, admin_secret):
    """Run a seeded workload; print op counts, errors by code, final digest."""
    try:
        spec = WorkloadSpec.load(spec_path)
        with open_client(data, url) as client:
            report = WorkloadRunner(client, spec).run()
            click.echo(f"ops applied: {report['ops_applied']}")
            click.echo(f"by op: {json.dumps(report['by_op'], sort_keys=True)}")
            click.echo(f"errors by code: {json.dumps(report['errors_by_code'], sort_keys=True)}")
            click.echo(f"final state digest: {report['final_state_digest']}")
    except CLIENT_ERRORS as err:
        _fail_on(err)


@main.command(name="verify-replay")
@click.option("--data", envvar="CAMPUSCLOUD_DATA", required=True)
def verify_replay_cmd(data):
    """Replay the event log from genesis; exit 0 iff digests check out."""
    report = verify_replay(data)
    for key in sorted(report):
        click.echo(f"{key}: {report[key]}")
    sys.exit(0 if report["ok"] else 1)


if __name__ == "__main__":
    main()
