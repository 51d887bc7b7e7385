"""Experiment orchestration: trajectories, sweeps, Monte-Carlo estimates, CSV output.

A run is fully determined by its config (including the five stream seeds), so
repeated runs produce byte-identical CSV files regardless of how many worker
processes a sweep uses.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import observables
from .model import (CASES, ModelSpec, RngStreams, add_all_to_all_env,
                    add_env_swbs, add_se_swbs, build_ring,
                    replace_random_env_bonds, save_model, spectral_bound)
from .observables import (delta_and_b, hermitian_eigendecomposition,
                          predicted_delta, predicted_sigma, purity_report,
                          reduce, sigma, to_energy_basis)
from .propagation import (apply_hamiltonian, chebyshev_step,
                          dense_hamiltonian_from_bonds, make_plan)
from .states import (StateVector, alternating_pattern, basis_product_state,
                     random_hypersphere_state, tensor)

CONFIG_FORMAT = "spin-experiment/1"
INITIAL_STATES = ("X", "UDUDY")

NORM_ERROR_LIMIT = 1e-9
MC_DIM_GUARD = 1 << 20
_MC_CHUNK_ELEMENTS = 1 << 22


def _fmt(x: float) -> str:
    """CSV number format: 17 significant digits (exact float round trip)."""
    return f"{x:.17g}"


@dataclass(frozen=True)
class Seeds:
    """One seed per named random stream."""

    couplings: int = 1
    state: int = 2
    swb_env: int = 3
    swb_se: int = 4
    random_bonds: int = 5

    def streams(self) -> RngStreams:
        return RngStreams.from_seeds(self.couplings, self.state, self.swb_env,
                                     self.swb_se, self.random_bonds)


@dataclass(frozen=True)
class ExperimentConfig:
    n_env: int
    case: str = "I"
    n_system: int = 4
    j_system: float = -0.15
    omega_max: float = 0.2
    delta_max: float = 0.2
    seeds: Seeds = field(default_factory=Seeds)
    swb_env_count: int = 0
    swb_se_count: int = 0
    k_max: int = 1
    all_to_all_env: bool = False
    random_bond_count: int = 0
    initial_state: str = "X"
    tau: float = math.pi
    t_max: float | None = None
    t_avg_start: float | None = None
    output_dir: str = "runs/run"
    max_sites: int = 24

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}")
        if self.initial_state not in INITIAL_STATES:
            raise ValueError(f"initial_state must be one of {INITIAL_STATES}")
        if self.n_system < 1 or self.n_env < 1:
            raise ValueError("need n_system >= 1 and n_env >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if min(self.swb_env_count, self.swb_se_count, self.random_bond_count) < 0:
            raise ValueError("bond counts must be nonnegative")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.t_max is not None and self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.t_avg_start is not None and self.t_avg_start >= self.resolved_t_max():
            raise ValueError("t_avg_start must lie before t_max")

    def resolved_t_max(self) -> float:
        """Explicit t_max, or a relaxation-scale default in units of 1/|J|."""
        if self.t_max is not None:
            return self.t_max
        scale = 200.0 if self.initial_state == "X" else 600.0
        return scale / abs(self.j_system)

    def window(self) -> tuple[float, float]:
        """Averaging window; defaults to the final half of the trajectory."""
        t_max = self.resolved_t_max()
        start = self.t_avg_start if self.t_avg_start is not None else t_max / 2.0
        return (start, t_max)


def config_to_dict(config: ExperimentConfig) -> dict:
    doc = asdict(config)
    doc["format"] = CONFIG_FORMAT
    return doc


def config_from_dict(doc: dict) -> ExperimentConfig:
    doc = dict(doc)
    fmt = doc.pop("format", None)
    if fmt != CONFIG_FORMAT:
        raise ValueError(f"expected format {CONFIG_FORMAT!r}, got {fmt!r}")
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    seeds_doc = doc.pop("seeds", None)
    if seeds_doc is not None:
        unknown = set(seeds_doc) - set(Seeds.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown seed keys: {sorted(unknown)}")
        doc["seeds"] = Seeds(**seeds_doc)
    return ExperimentConfig(**doc)


def save_config(path: str | Path, config: ExperimentConfig) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")
    return path


def load_config(path: str | Path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    sigma: float
    delta_fitted: float
    delta_uniform: float
    b_fitted: float
    purity: float
    trace_diag_sq: float
    energy: float
    norm_error: float
    moduli: tuple[float, ...] | None = None


_RECORD_COLUMNS = ("t", "sigma", "delta_fitted", "delta_uniform", "b_fitted",
                   "purity", "trace_diag_sq", "energy", "norm_error")


def _moduli_columns(d_system: int) -> list[str]:
    i, j = np.triu_indices(d_system, k=0)
    return [f"rho_{a}_{b}" for a, b in zip(i, j)]


def build_model(config: ExperimentConfig) -> ModelSpec:
    """Ring, then environment SWBs, SE SWBs, all-to-all, random-bond replacement."""
    streams = config.seeds.streams()
    spec = build_ring(config.n_system, config.n_env, config.case,
                      config.j_system, config.omega_max, config.delta_max,
                      streams.couplings)
    if config.swb_env_count:
        spec = add_env_swbs(spec, config.swb_env_count, streams.swb_env)
    if config.swb_se_count:
        spec = add_se_swbs(spec, config.swb_se_count, config.k_max, streams.swb_se)
    if config.all_to_all_env:
        spec = add_all_to_all_env(spec, streams.swb_env)
    if config.random_bond_count:
        spec = replace_random_env_bonds(spec, config.random_bond_count,
                                        config.omega_max, streams.random_bonds)
    return spec


def initial_state(config: ExperimentConfig) -> StateVector:
    streams = config.seeds.streams()
    if config.initial_state == "X":
        return random_hypersphere_state(config.n_system + config.n_env, streams.state)
    return tensor(basis_product_state(alternating_pattern(config.n_system)),
                  random_hypersphere_state(config.n_env, streams.state))


def _measure(t: float, psi: StateVector, spec: ModelSpec, basis,
             track_moduli: bool) -> TimeSeriesRecord:
    norm_error = abs(psi.norm() - 1.0)
    rho = reduce(psi, spec.n_system)
    rho_t = to_energy_basis(rho, basis)
    sig = sigma(rho_t)
    delta_u, _ = delta_and_b(rho_t, basis.energies, basis.degeneracy_tol,
                             mode=observables.MODE_UNIFORM)
    try:
        delta_f, b_f = delta_and_b(rho_t, basis.energies, basis.degeneracy_tol,
                                   mode=observables.MODE_FITTED)
    except ValueError:
        delta_f, b_f = float("nan"), float("nan")
    purity, trace_diag_sq = purity_report(rho_t)
    energy = float(np.vdot(psi.amplitudes, apply_hamiltonian(spec, psi)).real)
    moduli = None
    if track_moduli:
        i, j = np.triu_indices(spec.d_system, k=0)
        moduli = tuple(float(m) for m in np.abs(rho_t.entries[i, j]))
    return TimeSeriesRecord(t, sig, delta_f, delta_u, b_f, purity,
                            trace_diag_sq, energy, norm_error, moduli)


@dataclass
class RunResult:
    config: ExperimentConfig
    spec: ModelSpec
    records: list[TimeSeriesRecord]
    csv_path: Path
    model_path: Path
    manifest_path: Path


def run_evolution(config: ExperimentConfig, track_moduli: bool = False) -> RunResult:
    """Propagate the configured model and record observables every step.

    The trajectory CSV is written incrementally; the run aborts if the state
    norm ever drifts by more than 1e-9.
    """
    n_sites = config.n_system + config.n_env
    if n_sites > config.max_sites:
        raise ValueError(f"{n_sites} sites exceeds the configured guard of "
                         f"{config.max_sites}")
    spec = build_model(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = save_model(out_dir / "model.txt", spec)

    h_system = dense_hamiltonian_from_bonds(spec.bonds_in("system"), spec.n_system)
    basis = hermitian_eigendecomposition(h_system)
    plan = make_plan(spec, config.tau)
    psi = initial_state(config)

    t_max = config.resolved_t_max()
    n_steps = int(math.ceil(t_max / config.tau - 1e-9))
    columns = list(_RECORD_COLUMNS)
    if track_moduli:
        columns += _moduli_columns(spec.d_system)

    records: list[TimeSeriesRecord] = []
    csv_path = out_dir / "trajectory.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")

        def emit(rec: TimeSeriesRecord) -> None:
            row = [_fmt(getattr(rec, name)) for name in _RECORD_COLUMNS]
            if track_moduli:
                row += [_fmt(m) for m in rec.moduli]
            fh.write(",".join(row) + "\n")
            fh.flush()
            records.append(rec)

        rec = _measure(0.0, psi, spec, basis, track_moduli)
        emit(rec)
        for k in range(1, n_steps + 1):
            psi = chebyshev_step(spec, plan, psi)
            rec = _measure(k * config.tau, psi, spec, basis, track_moduli)
            if rec.norm_error >= NORM_ERROR_LIMIT:
                raise RuntimeError(f"norm drifted by {rec.norm_error:.3e} at "
                                   f"t={rec.t:g}; aborting run")
            emit(rec)

    manifest_path = out_dir / "manifest.json"
    manifest = {
        "format": "spin-run-manifest/1",
        "config": config_to_dict(config),
        "model_file": model_path.name,
        "trajectory_file": csv_path.name,
        "n_records": len(records),
        "spectral_bound": spectral_bound(spec),
        "chebyshev_terms": plan.term_count,
        "track_moduli": track_moduli,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(config, spec, records, csv_path, model_path, manifest_path)


def track_components(config: ExperimentConfig) -> RunResult:
    """run_evolution with the per-element |rho_ij| block enabled."""
    return run_evolution(config, track_moduli=True)


class WindowAverage(NamedTuple):
    sigma: float
    delta_uniform: float
    b_fitted: float


def time_average(records: list[TimeSeriesRecord],
                 window: tuple[float, float]) -> WindowAverage:
    """Arithmetic means over records with t inside the window.

    The b average skips records where the Boltzmann fit was undefined.
    """
    t0, t1 = window
    if t1 <= t0:
        raise ValueError("window must have positive length")
    if not records:
        raise ValueError("empty trajectory")
    if t0 < records[0].t - 1e-9 or t1 > records[-1].t + 1e-9:
        raise ValueError("window extends outside the trajectory span")
    sel = [r for r in records if t0 - 1e-9 <= r.t <= t1 + 1e-9]
    if len(sel) < 10:
        raise ValueError(f"window holds {len(sel)} records, need at least 10")
    sigma_bar = float(np.mean([r.sigma for r in sel]))
    delta_bar = float(np.mean([r.delta_uniform for r in sel]))
    b_vals = [r.b_fitted for r in sel if math.isfinite(r.b_fitted)]
    b_bar = float(np.mean(b_vals)) if b_vals else float("nan")
    return WindowAverage(sigma_bar, delta_bar, b_bar)


@dataclass(frozen=True)
class SweepRow:
    n_env: int
    sigma_bar: float
    sigma_pred: float
    ratio: float
    delta_bar: float
    delta_pred: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    slope_ln_sigma: float
    slope_ln_delta: float
    csv_path: Path
    run_dirs: list[Path]


def _sweep_point(config: ExperimentConfig) -> SweepRow:
    result = run_evolution(config)
    avg = time_average(result.records, config.window())
    d_system = 1 << config.n_system
    d_env = 1 << config.n_env
    pred = predicted_sigma(d_system, d_env)
    return SweepRow(config.n_env, avg.sigma, pred, avg.sigma / pred,
                    avg.delta_uniform, predicted_delta(d_system, d_env))


def scaling_sweep(config: ExperimentConfig, n_env_list: list[int],
                  workers: int = 1) -> SweepResult:
    """One run per environment size, with predictions and log-scale slopes.

    Points are independent, so they may run in separate worker processes; the
    output is identical for any worker count.
    """
    if not n_env_list:
        raise ValueError("n_env_list is empty")
    base = Path(config.output_dir)
    configs = [replace(config, n_env=ne, output_dir=str(base / f"ne{ne:02d}"))
               for ne in n_env_list]
    if workers <= 1:
        rows = [_sweep_point(c) for c in configs]
    else:
        ctx = get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            rows = list(pool.map(_sweep_point, configs))

    ne = np.array(n_env_list, dtype=float)
    slope_sigma = float(np.polyfit(ne, np.log([r.sigma_bar for r in rows]), 1)[0])
    slope_delta = float(np.polyfit(ne, np.log([r.delta_bar for r in rows]), 1)[0])

    base.mkdir(parents=True, exist_ok=True)
    csv_path = base / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write("n_env,sigma_bar,sigma_pred,ratio,delta_bar,delta_pred\n")
        for r in rows:
            fh.write(",".join([str(r.n_env), _fmt(r.sigma_bar), _fmt(r.sigma_pred),
                               _fmt(r.ratio), _fmt(r.delta_bar),
                               _fmt(r.delta_pred)]) + "\n")
    summary = {
        "format": "spin-sweep-summary/1",
        "n_env_list": list(n_env_list),
        "slope_ln_sigma_per_n_env": slope_sigma,
        "slope_ln_delta_per_n_env": slope_delta,
        "rows": [asdict(r) for r in rows],
    }
    (base / "sweep_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return SweepResult(rows, slope_sigma, slope_delta, csv_path,
                       [Path(c.output_dir) for c in configs])


@dataclass(frozen=True)
class McResult:
    d_system: int
    d_env: int | None
    samples: int
    mean_two_sigma_sq: float
    se_two_sigma_sq: float
    expected_two_sigma_sq: float
    mean_delta_sq: float
    se_delta_sq: float
    expected_delta_sq: float


def mc_expectation(d_system: int, d_env: int | None, sample_count: int,
                   seed: int) -> McResult:
    """Sample means of 2 sigma^2 and delta^2 over random hypersphere states.

    With an environment the closed-form targets are (d_s - 1)/(d_s d_e + 1)
    and its diagonal counterpart; without one the state itself is reduced to
    a rank-1 projector and the isolated-system expectation applies.  The
    basis is irrelevant in law, so the computational basis is used.
    """
    if d_system < 2:
        raise ValueError("need d_system >= 2")
    if d_env is not None and d_env < 1:
        raise ValueError("need d_env >= 1")
    if sample_count < 100:
        raise ValueError("need at least 100 samples")
    dim = d_system * (d_env if d_env else 1)
    if dim > MC_DIM_GUARD:
        raise ValueError(f"total dimension {dim} exceeds the Monte-Carlo guard")

    chunk = max(1, min(1024, _MC_CHUNK_ELEMENTS // dim))
    n_chunks = (sample_count + chunk - 1) // chunk
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    two_sigma_sq = np.empty(sample_count)
    delta_sq = np.empty(sample_count)
    done = 0
    for child in children:
        m = min(chunk, sample_count - done)
        gen = np.random.Generator(np.random.PCG64(child))
        z = gen.standard_normal((m, dim, 2))
        amps = z[:, :, 0] + 1j * z[:, :, 1]
        amps /= np.linalg.norm(amps, axis=1, keepdims=True)
        if d_env is None:
            prob = np.abs(amps) ** 2
            two_sigma_sq[done:done + m] = 1.0 - (prob ** 2).sum(axis=1)
            delta_sq[done:done + m] = ((prob - 1.0 / d_system) ** 2).sum(axis=1)
        else:
            mat = amps.reshape(m, d_env, d_system)
            rho = np.einsum("npi,npj->nij", mat, mat.conj())
            diag = np.einsum("nii->ni", rho).real
            total = (np.abs(rho) ** 2).sum(axis=(1, 2))
            two_sigma_sq[done:done + m] = total - (diag ** 2).sum(axis=1)
            delta_sq[done:done + m] = ((diag - 1.0 / d_system) ** 2).sum(axis=1)
        done += m

    d_e = d_env if d_env else 1
    expected_two = ((d_system - 1) / (d_system + 1) if d_env is None
                    else (d_system - 1) / (d_system * d_e + 1))
    expected_delta = (d_system - 1) / (d_system * (d_system * d_e + 1.0))
    return McResult(
        d_system=d_system,
        d_env=d_env,
        samples=sample_count,
        mean_two_sigma_sq=float(two_sigma_sq.mean()),
        se_two_sigma_sq=float(two_sigma_sq.std(ddof=1) / math.sqrt(sample_count)),
        expected_two_sigma_sq=float(expected_two),
        mean_delta_sq=float(delta_sq.mean()),
        se_delta_sq=float(delta_sq.std(ddof=1) / math.sqrt(sample_count)),
        expected_delta_sq=float(expected_delta),
    )
