"""Command-line client for the simulation service.

Each subcommand marshals its arguments into the service's request models.
With --server (or SPINBATH_SERVER) the request goes over HTTP to a running
`spinbath serve` instance; otherwise it is dispatched in-process through the
same handler functions, so both paths exercise identical code.
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import httpx
from pydantic import ValidationError

from . import __version__
from .service import handlers
from .service.schemas import (ConfigModel, EvolveRequest, McRequest,
                              McResponse, PredictRequest, PredictResponse,
                              RunSummary, SweepRequest, SweepResponse,
                              TrackRequest)

_LOCAL = {
    "/predict": (handlers.predict, PredictResponse),
    "/mc": (handlers.mc, McResponse),
    "/evolve": (handlers.evolve, RunSummary),
    "/track": (handlers.track, RunSummary),
    "/sweep": (handlers.sweep, SweepResponse),
}


def _request(model_cls, **kwargs):
    try:
        return model_cls(**kwargs)
    except ValidationError as exc:
        raise click.ClickException(str(exc))


class Client:
    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, path: str, request):
        if self.server is None:
            fn, _ = _LOCAL[path]
            try:
                return fn(request)
            except (ValueError, RuntimeError) as exc:
                raise click.ClickException(str(exc))
        response = httpx.post(self.server + path,
                              json=request.model_dump(mode="json"),
                              timeout=None)
        if response.status_code != 200:
            raise click.ClickException(
                f"{path} failed with HTTP {response.status_code}: {response.text}")
        _, model = _LOCAL[path]
        return model.model_validate(response.json())


def _load_config(path: str) -> ConfigModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read config {path}: {exc}")
    try:
        return ConfigModel.model_validate(doc)
    except ValidationError as exc:
        raise click.ClickException(f"invalid config {path}:\n{exc}")


def _print_fields(model, names):
    for name in names:
        value = getattr(model, name)
        if isinstance(value, float):
            click.echo(f"{name} {value:.17g}")
        else:
            click.echo(f"{name} {value}")


@click.group()
@click.version_option(__version__)
@click.option("--server", envvar="SPINBATH_SERVER", default=None, metavar="URL",
              help="Base URL of a running service; omit to run in-process.")
@click.pass_context
def main(ctx, server):
    """Spin-bath decoherence simulator."""
    ctx.obj = Client(server)


@main.command()
@click.option("--ds", "d_system", type=int, required=True,
              help="System Hilbert-space dimension.")
@click.option("--de", "d_env", type=int, default=None,
              help="Environment Hilbert-space dimension.")
@click.option("--ne", "n_env", type=int, default=None,
              help="Environment spin count (alternative to --de).")
@click.pass_obj
def predict(client: Client, d_system, d_env, n_env):
    """Closed-form expectations for sigma and delta."""
    if (d_env is None) == (n_env is None):
        raise click.ClickException("give exactly one of --de or --ne")
    if n_env is not None:
        d_env = 1 << n_env
    resp = client.call("/predict", _request(PredictRequest, d_system=d_system,
                                            d_env=d_env))
    _print_fields(resp, ["d_system", "d_env", "sigma_expected",
                         "sigma_isolated", "delta_expected"])


@main.command()
@click.option("--ds", "d_system", type=int, required=True)
@click.option("--de", "d_env", type=int, default=None,
              help="Environment dimension; omit for the isolated-system variant.")
@click.option("--samples", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
def mc(client: Client, d_system, d_env, samples, seed):
    """Monte-Carlo check of the closed-form expectations."""
    resp = client.call("/mc", _request(McRequest, d_system=d_system,
                                       d_env=d_env, samples=samples, seed=seed))
    _print_fields(resp, ["d_system", "d_env", "samples",
                         "mean_two_sigma_sq", "se_two_sigma_sq",
                         "expected_two_sigma_sq", "mean_delta_sq",
                         "se_delta_sq", "expected_delta_sq"])


_SUMMARY_FIELDS = ["csv_path", "model_path", "manifest_path", "n_records",
                   "window_start", "window_end", "sigma_bar", "delta_bar", "b_bar"]


@main.command()
@click.argument("config", type=click.Path(exists=False))
@click.pass_obj
def evolve(client: Client, config):
    """Run one trajectory from a JSON config file."""
    resp = client.call("/evolve", _request(EvolveRequest, config=_load_config(config)))
    _print_fields(resp, _SUMMARY_FIELDS)


@main.command()
@click.argument("config", type=click.Path(exists=False))
@click.pass_obj
def track(client: Client, config):
    """Run one trajectory recording every |rho_ij| component."""
    resp = client.call("/track", _request(TrackRequest, config=_load_config(config)))
    _print_fields(resp, _SUMMARY_FIELDS)


@main.command()
@click.argument("config", type=click.Path(exists=False))
@click.option("--ne", "n_env_list", required=True, metavar="N1,N2,...",
              help="Comma-separated environment sizes.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.pass_obj
def sweep(client: Client, config, n_env_list, workers):
    """Scaling sweep over environment sizes."""
    try:
        sizes = [int(tok) for tok in n_env_list.split(",") if tok.strip()]
    except ValueError:
        raise click.ClickException(f"cannot parse --ne list {n_env_list!r}")
    resp = client.call("/sweep", _request(SweepRequest, config=_load_config(config),
                                          n_env_list=sizes, workers=workers))
    click.echo("n_env sigma_bar sigma_pred ratio delta_bar delta_pred")
    for row in resp.rows:
        click.echo(f"{row.n_env} {row.sigma_bar:.6e} {row.sigma_pred:.6e} "
                   f"{row.ratio:.4f} {row.delta_bar:.6e} {row.delta_pred:.6e}")
    click.echo(f"slope_ln_sigma {resp.slope_ln_sigma:.17g}")
    click.echo(f"slope_ln_delta {resp.slope_ln_delta:.17g}")
    click.echo(f"csv_path {resp.csv_path}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
