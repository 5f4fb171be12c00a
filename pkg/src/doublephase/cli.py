"""Thin CLI client over the service.

By default requests are dispatched to the in-process app (no network, fully
deterministic); pass ``--server`` to talk to a remote instance instead.  The
client writes the machine-readable outputs and maps result statuses to exit
codes: 0 ok, 1 config error, 2 non-convergence, 3 infeasible lambda,
4 property failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2
EXIT_INFEASIBLE = 3
EXIT_PROPS = 4


def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(path, json=payload)
    from starlette.testclient import TestClient

    from .service import app

    with TestClient(app, raise_server_exceptions=False) as client:
        return client.post(path, json=payload)


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        click.echo(f"config error: {err}", err=True)
        raise SystemExit(EXIT_CONFIG)


def _bail_on_http_error(resp: httpx.Response) -> None:
    if resp.status_code == 200:
        return
    try:
        detail = resp.json().get("detail", resp.text)
    except ValueError:
        detail = resp.text
    if resp.status_code >= 500:
        click.echo(f"solver error: {detail}", err=True)
        raise SystemExit(EXIT_NONCONVERGED)
    click.echo(f"config error: {detail}", err=True)
    raise SystemExit(EXIT_CONFIG)


def _emit_warnings(body: dict) -> None:
    for w in body.get("warnings", []):
        click.echo(f"warning: {w}", err=True)


def _dump_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _write_field(path: Path, values: list[float]) -> None:
    path.write_text("".join(f"{v:.17g}\n" for v in values))


def _prepare_out(out: str) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


_config_opt = click.option("--config", required=True, type=click.Path(), help="run config JSON")
_out_opt = click.option("--out", default=".", type=click.Path(file_okay=False), help="output directory")
_server_opt = click.option("--server", default=None, help="remote service URL (default: in-process)")


@click.group()
def main() -> None:
    """Double-phase Dirichlet eigenvalue solver."""


@main.command()
@_config_opt
@_out_opt
@_server_opt
def eig(config: str, out: str, server: str | None) -> None:
    """Principal eigenvalue of the weighted p-Laplacian."""
    resp = _post(server, "/eig", _load_config(config))
    _bail_on_http_error(resp)
    body = resp.json()
    _emit_warnings(body)
    out_dir = _prepare_out(out)
    report = {k: v for k, v in body.items() if k != "eigenfunction"}
    (out_dir / "report.json").write_text(_dump_json(report))
    _write_field(out_dir / "eigenfunction.txt", body["eigenfunction"])
    click.echo(
        f"lambda_hat1 = {body['lambda_hat1']:.12g} "
        f"(residual {body['residual']:.3e}, {body['iterations']} iterations)"
    )
    raise SystemExit(EXIT_OK if body["status"] == "ok" else EXIT_NONCONVERGED)


@main.command()
@_config_opt
@_out_opt
@_server_opt
def solve(config: str, out: str, server: str | None) -> None:
    """Eigenpair at a single lambda via Nehari-manifold minimization."""
    resp = _post(server, "/solve", _load_config(config))
    _bail_on_http_error(resp)
    body = resp.json()
    _emit_warnings(body)
    out_dir = _prepare_out(out)
    report = {k: v for k, v in body.items() if k != "eigenfunction"}
    (out_dir / "report.json").write_text(_dump_json(report))
    if body["status"] == "ok" and body.get("eigenfunction"):
        _write_field(out_dir / "eigenfunction.txt", body["eigenfunction"])
    if body["status"] == "infeasible":
        click.echo(
            f"lambda = {body['lambda']:.12g} is infeasible "
            f"(lambda_hat1 = {body['lambda_hat1']:.12g}); no eigenpair exists"
        )
        raise SystemExit(EXIT_INFEASIBLE)
    if body["status"] == "nonconverged":
        click.echo("minimization did not converge", err=True)
        raise SystemExit(EXIT_NONCONVERGED)
    click.echo(
        f"m_lambda = {body['m_lambda']:.12g} at lambda = {body['lambda']:.12g} "
        f"(residual {body['residual']:.3e})"
    )
    raise SystemExit(EXIT_OK)


@main.command()
@_config_opt
@_out_opt
@_server_opt
def sweep(config: str, out: str, server: str | None) -> None:
    """Feasibility/energy table over a lambda range, written as CSV."""
    resp = _post(server, "/sweep", _load_config(config))
    _bail_on_http_error(resp)
    body = resp.json()
    _emit_warnings(body)
    out_dir = _prepare_out(out)
    (out_dir / "sweep.csv").write_text(body["csv"])
    n_feasible = sum(1 for r in body["rows"] if r["feasible"])
    click.echo(
        f"swept {len(body['rows'])} lambda values "
        f"({n_feasible} feasible, lambda_hat1 = {body['lambda_hat1']:.12g})"
    )
    raise SystemExit(EXIT_OK)


@main.command()
@_config_opt
@_out_opt
@_server_opt
def props(config: str, out: str, server: str | None) -> None:
    """Property suite over the modulars, pairings, and projections."""
    resp = _post(server, "/props", _load_config(config))
    _bail_on_http_error(resp)
    body = resp.json()
    _emit_warnings(body)
    out_dir = _prepare_out(out)
    (out_dir / "report.json").write_text(_dump_json(body))
    for prop in body["properties"]:
        click.echo(
            f"{prop['name']}: {prop['trials'] - prop['failures']}/{prop['trials']} "
            f"(worst slack {prop['worst_slack']:.3e}, tolerance {prop['tolerance']:.1e})"
        )
    if body["status"] != "ok":
        click.echo(f"property failure: {body['first_failure']}", err=True)
        raise SystemExit(EXIT_PROPS)
    raise SystemExit(EXIT_OK)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("doublephase.service:app", host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
