"""Command-line client for the qbm service.

Every verb posts to the HTTP API and prints the JSON response.  Without
--url the service app is mounted in-process, so no server needs to be
running.  Exit codes: 0 success, 1 configuration error, 2 numeric failure,
3 partial sweep/scan.
"""

from __future__ import annotations

import json
import sys

import click
import httpx
import yaml

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_PARTIAL = 3


def _client(url: str | None) -> httpx.Client:
    if url:
        return httpx.Client(base_url=url, timeout=None)
    # In-process fallback: mount the ASGI app directly so no server is
    # needed.  TestClient is a synchronous httpx.Client subclass.
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

    from .service import app
    return TestClient(app, raise_server_exceptions=False)


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if not isinstance(raw, dict):
        click.echo(f"config error: {path} must be a mapping", err=True)
        sys.exit(EXIT_CONFIG)
    return raw


def _post(url: str | None, endpoint: str, payload) -> dict:
    with _client(url) as client:
        resp = client.post(endpoint, json=payload)
    if resp.status_code in (400, 422):
        click.echo(f"config error: {resp.text}", err=True)
        sys.exit(EXIT_CONFIG)
    if resp.status_code >= 500:
        click.echo(f"numeric failure: {resp.text}", err=True)
        sys.exit(EXIT_NUMERIC)
    return resp.json()


def _finish(result: dict) -> None:
    click.echo(json.dumps(result, indent=1, sort_keys=True))
    if result.get("partial"):
        sys.exit(EXIT_PARTIAL)
    sys.exit(EXIT_OK)


@click.group()
@click.option("--url", default=None, envvar="QBM_URL",
              help="Base URL of a running service; in-process by default.")
@click.pass_context
def main(ctx, url):
    """Breathing-mode simulations of two trapped interacting particles."""
    ctx.obj = url


def _apply_overrides(raw: dict, overrides) -> dict:
    for item in overrides:
        try:
            dotted, value = item.split("=", 1)
        except ValueError:
            click.echo(f"config error: bad override {item!r}", err=True)
            sys.exit(EXIT_CONFIG)
        node = raw
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = yaml.safe_load(value)
    return raw


def _config_verb(name: str, endpoint: str, doc: str):
    @main.command(name=name, help=doc)
    @click.option("--config", "-c", "config_path", required=True,
                  type=click.Path(exists=False), help="Run config (YAML/JSON)")
    @click.option("--set", "-s", "overrides", multiple=True,
                  help="Override a config entry, e.g. -s system.coupling=2")
    @click.pass_obj
    def verb(url, config_path, overrides):
        raw = _apply_overrides(_load_config_file(config_path), overrides)
        _finish(_post(url, endpoint, raw))

    return verb


_config_verb("ground", "/ground", "Ground-state energies for a config.")
_config_verb("run", "/run", "One full run: ground, excite, propagate, fit.")
_config_verb("sweep", "/sweep", "Coupling sweep over config.couplings.")
_config_verb("scan", "/scan", "Resonance scan over config.scan frequencies.")


@main.command()
@click.option("--config", "-c", "config_path", required=True,
              type=click.Path(exists=False))
@click.option("--model", default="both",
              type=click.Choice(["hartree", "semiclassical", "both"]))
@click.option("--set", "-s", "overrides", multiple=True,
              help="Override a config entry, e.g. -s system.coupling=2")
@click.pass_obj
def meanfield(url, config_path, model, overrides):
    """Mean-field breathing frequencies (small/large coupling models)."""
    raw = _apply_overrides(_load_config_file(config_path), overrides)
    _finish(_post(url, "/meanfield", {"config": raw, "model": model}))


@main.command()
@click.option("--config", "-c", "config_path", default=None,
              type=click.Path(exists=False),
              help="Config whose system defines the diagonalization curve.")
@click.option("--curve", default=None, type=click.Path(exists=False),
              help="Sweep summary JSON to calibrate against instead.")
@click.pass_obj
def fitformula(url, config_path, curve):
    """Calibrate the closed-form omega_r(coupling) formula."""
    payload: dict = {}
    if curve is not None:
        try:
            with open(curve) as fh:
                sweep = json.load(fh)
            points = [p for p in sweep["points"] if "omega_r" in p]
            payload["couplings"] = [p["coupling"] for p in points]
            payload["omegas"] = [p["omega_r"] for p in points]
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            click.echo(f"config error: cannot use curve {curve}: {exc}",
                       err=True)
            sys.exit(EXIT_CONFIG)
    else:
        payload["config"] = _load_config_file(config_path) if config_path else {}
    _finish(_post(url, "/fitformula", payload))


@main.command()
@click.argument("figure_id")
@click.option("--input", "-i", "inputs", multiple=True, required=True,
              help="Run/sweep summary JSON files.")
@click.option("--out", "-o", "out_path", required=True)
@click.pass_obj
def emit(url, figure_id, inputs, out_path):
    """Emit plot-ready columnar data for fig1/fig3/fig4/fig5."""
    _finish(_post(url, "/emit", {"figure_id": figure_id,
                                 "inputs": list(inputs),
                                 "out_path": out_path}))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
