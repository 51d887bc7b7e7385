"""A minimal in-process job registry for long-running simulation requests."""

from __future__ import annotations

import threading
import traceback
from dataclasses import dataclass, field
from typing import Any, Callable

from .schemas import JobStatus


@dataclass
class _Job:
    job_id: str
    kind: str
    status: str = "queued"
    result: dict | None = None
    error: str | None = None
    thread: threading.Thread | None = field(default=None, repr=False)

    def snapshot(self) -> JobStatus:
        return JobStatus(job_id=self.job_id, kind=self.kind, status=self.status,
                         result=self.result, error=self.error)


class JobRegistry:
    """Runs handlers on daemon threads and keeps their outcomes queryable."""

    def __init__(self):
        self._jobs: dict[str, _Job] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def submit(self, kind: str, fn: Callable[[Any], Any], request: Any) -> str:
        with self._lock:
            self._counter += 1
            job_id = f"{kind}-{self._counter:04d}"
            job = _Job(job_id, kind)
            self._jobs[job_id] = job

        def work():
            job.status = "running"
            try:
                response = fn(request)
                job.result = response.model_dump()
                job.status = "done"
            except Exception as exc:  # surfaced via the status endpoint
                job.error = f"{type(exc).__name__}: {exc}"
                job.status = "error"
                traceback.print_exc()

        thread = threading.Thread(target=work, name=job_id, daemon=True)
        job.thread = thread
        thread.start()
        return job_id

    def get(self, job_id: str) -> JobStatus | None:
        job = self._jobs.get(job_id)
        return job.snapshot() if job else None

    def all(self) -> list[JobStatus]:
        return [job.snapshot() for job in self._jobs.values()]

    def wait(self, job_id: str, timeout: float | None = None) -> JobStatus:
        job = self._jobs[job_id]
        if job.thread is not None:
            job.thread.join(timeout)
        return job.snapshot()
