"""Service operations as plain functions: request model in, response model out.

The FastAPI app and the CLI's local mode both dispatch through these, so the
two surfaces cannot drift apart.
"""

from __future__ import annotations

from ..experiments import mc_expectation, run_evolution, scaling_sweep, time_average
from ..observables import predicted_delta, predicted_sigma, predicted_sigma_isolated
from .schemas import (EvolveRequest, McRequest, McResponse, PredictRequest,
                      PredictResponse, RunSummary, SweepRequest, SweepResponse,
                      TrackRequest)


def predict(req: PredictRequest) -> PredictResponse:
    return PredictResponse(
        d_system=req.d_system,
        d_env=req.d_env,
        sigma_expected=predicted_sigma(req.d_system, req.d_env),
        sigma_isolated=predicted_sigma_isolated(req.d_system),
        delta_expected=predicted_delta(req.d_system, req.d_env),
    )


def mc(req: McRequest) -> McResponse:
    result = mc_expectation(req.d_system, req.d_env, req.samples, req.seed)
    return McResponse.from_core(result)


def _run(config_model, track: bool) -> RunSummary:
    config = config_model.to_core()
    result = run_evolution(config, track_moduli=track)
    window = config.window()
    avg = time_average(result.records, window)
    return RunSummary.build(result, window, avg)


def evolve(req: EvolveRequest) -> RunSummary:
    return _run(req.config, track=False)


def track(req: TrackRequest) -> RunSummary:
    return _run(req.config, track=True)


def sweep(req: SweepRequest) -> SweepResponse:
    result = scaling_sweep(req.config.to_core(), req.n_env_list, req.workers)
    return SweepResponse.from_core(result)
