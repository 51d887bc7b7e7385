"""FastAPI wrapper around the simulation package.

Fast operations (predict, mc) respond synchronously.  Trajectory runs and
sweeps can take minutes, so they are also exposed through a job interface:
POST /jobs/<kind> returns a ticket, GET /jobs/<id> reports progress and the
eventual result.  Output files are written server-side under the run's
configured output directory.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from . import handlers
from .jobs import JobRegistry
from .schemas import (EvolveRequest, HealthResponse, JobStatus, JobTicket,
                      McRequest, McResponse, PredictRequest, PredictResponse,
                      RunSummary, SweepRequest, SweepResponse, TrackRequest)

app = FastAPI(title="spinbath", version=__version__)
jobs = JobRegistry()

_JOB_KINDS = {
    "evolve": (EvolveRequest, handlers.evolve),
    "sweep": (SweepRequest, handlers.sweep),
    "track": (TrackRequest, handlers.track),
}


def _guarded(fn, request):
    try:
        return fn(request)
    except (ValueError, RuntimeError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/predict", response_model=PredictResponse)
def predict(request: PredictRequest) -> PredictResponse:
    return _guarded(handlers.predict, request)


@app.post("/mc", response_model=McResponse)
def mc(request: McRequest) -> McResponse:
    return _guarded(handlers.mc, request)


@app.post("/evolve", response_model=RunSummary)
def evolve(request: EvolveRequest) -> RunSummary:
    return _guarded(handlers.evolve, request)


@app.post("/track", response_model=RunSummary)
def track(request: TrackRequest) -> RunSummary:
    return _guarded(handlers.track, request)


@app.post("/sweep", response_model=SweepResponse)
def sweep(request: SweepRequest) -> SweepResponse:
    return _guarded(handlers.sweep, request)


@app.post("/jobs/evolve", response_model=JobTicket)
def submit_evolve(request: EvolveRequest) -> JobTicket:
    return JobTicket(job_id=jobs.submit("evolve", handlers.evolve, request))


@app.post("/jobs/sweep", response_model=JobTicket)
def submit_sweep(request: SweepRequest) -> JobTicket:
    return JobTicket(job_id=jobs.submit("sweep", handlers.sweep, request))


@app.post("/jobs/track", response_model=JobTicket)
def submit_track(request: TrackRequest) -> JobTicket:
    return JobTicket(job_id=jobs.submit("track", handlers.track, request))


@app.get("/jobs", response_model=list[JobStatus])
def list_jobs() -> list[JobStatus]:
    return jobs.all()


@app.get("/jobs/{job_id}", response_model=JobStatus)
def job_status(job_id: str) -> JobStatus:
    status = jobs.get(job_id)
    if status is None:
        raise HTTPException(status_code=404, detail=f"no job {job_id!r}")
    return status
