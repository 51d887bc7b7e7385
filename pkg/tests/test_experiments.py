import json
import math

import numpy as np
import pytest

from spinbath.experiments import (ExperimentConfig, Seeds, TimeSeriesRecord,
                                  build_model, config_from_dict,
                                  config_to_dict, initial_state, load_config,
                                  mc_expectation, run_evolution, save_config,
                                  scaling_sweep, time_average,
                                  track_components)
from spinbath.model import model_to_text
from spinbath.observables import (hermitian_eigendecomposition, reduce, sigma,
                                  to_energy_basis)
from spinbath.propagation import dense_hamiltonian_from_bonds


def tiny_config(tmp_path, **overrides):
    base = dict(n_env=3, case="I", n_system=3, tau=2.0, t_max=60.0,
                output_dir=str(tmp_path / "run"))
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_roundtrip(tmp_path):
    cfg = tiny_config(tmp_path, seeds=Seeds(couplings=9))
    path = save_config(tmp_path / "cfg.json", cfg)
    assert load_config(path) == cfg


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tiny_config(tmp_path)
    doc = config_to_dict(cfg)
    doc["typo_field"] = 1
    with pytest.raises(ValueError, match="unknown config keys"):
        config_from_dict(doc)
    doc = config_to_dict(cfg)
    doc["seeds"]["extra"] = 2
    with pytest.raises(ValueError, match="unknown seed keys"):
        config_from_dict(doc)
    doc = config_to_dict(cfg)
    del doc["format"]
    with pytest.raises(ValueError, match="format"):
        config_from_dict(doc)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(n_env=4, case="X")
    with pytest.raises(ValueError):
        ExperimentConfig(n_env=4, initial_state="YX")
    with pytest.raises(ValueError):
        ExperimentConfig(n_env=4, tau=0.0)
    with pytest.raises(ValueError):
        ExperimentConfig(n_env=4, t_max=100.0, t_avg_start=100.0)
    with pytest.raises(ValueError):
        ExperimentConfig(n_env=0)


def test_config_window_defaults():
    cfg = ExperimentConfig(n_env=4, t_max=120.0)
    assert cfg.window() == (60.0, 120.0)
    cfg = ExperimentConfig(n_env=4, t_max=120.0, t_avg_start=90.0)
    assert cfg.window() == (90.0, 120.0)
    # default horizon scales with 1/|J|
    cfg = ExperimentConfig(n_env=4, initial_state="X")
    assert cfg.resolved_t_max() == pytest.approx(200.0 / 0.15)
    cfg = ExperimentConfig(n_env=4, initial_state="UDUDY")
    assert cfg.resolved_t_max() == pytest.approx(600.0 / 0.15)


def test_build_model_mutation_order(tmp_path):
    cfg = tiny_config(tmp_path, n_system=4, n_env=8, case="II",
                      swb_env_count=2, swb_se_count=2, k_max=1,
                      random_bond_count=1)
    spec = build_model(cfg)
    assert "env_swb count=2" in spec.label
    assert "se_swb count=2" in spec.label
    assert "random_bonds count=1" in spec.label
    pairs = [(b.site_a, b.site_b) for b in spec.bonds]
    assert len(pairs) == len(set(pairs))


def test_nesting_across_configs(tmp_path):
    base = dict(n_env=10, case="II", t_max=50.0, tau=5.0,
                output_dir=str(tmp_path / "n"))
    one = build_model(ExperimentConfig(random_bond_count=1, **base))
    two = build_model(ExperimentConfig(random_bond_count=2, **base))
    ring = build_model(ExperimentConfig(random_bond_count=0, **base))
    changed_one = {b for a, b in zip(ring.bonds, one.bonds) if a != b}
    changed_two = {b for a, b in zip(ring.bonds, two.bonds) if a != b}
    assert changed_one < changed_two

    swb1 = build_model(ExperimentConfig(swb_env_count=1, **base))
    swb3 = build_model(ExperimentConfig(swb_env_count=3, **base))
    assert set(swb1.bonds) - set(ring.bonds) < set(swb3.bonds) - set(ring.bonds)


def test_run_guard(tmp_path):
    cfg = tiny_config(tmp_path, n_env=22)
    with pytest.raises(ValueError, match="guard"):
        run_evolution(cfg)


def test_zero_hamiltonian_run_is_static(tmp_path):
    cfg = tiny_config(tmp_path, case="II", j_system=0.0, n_system=2, n_env=3,
                      tau=1.0, t_max=12.0)
    result = run_evolution(cfg)
    assert len(result.records) == 13
    with open(result.csv_path) as fh:
        rows = [line.strip().split(",")[1:] for line in fh][1:]  # drop t column
    assert all(row == rows[0] for row in rows)


def test_t0_record_matches_direct_observables(tmp_path):
    cfg = tiny_config(tmp_path, n_system=4, n_env=3, case="II", tau=3.0,
                      t_max=9.0, initial_state="X")
    result = run_evolution(cfg)
    psi = initial_state(cfg)
    h_sys = dense_hamiltonian_from_bonds(result.spec.bonds_in("system"), 4)
    basis = hermitian_eigendecomposition(h_sys)
    direct = sigma(to_energy_basis(reduce(psi, 4), basis))
    assert result.records[0].sigma == pytest.approx(direct, rel=1e-12)
    assert result.records[0].t == 0.0


def test_run_outputs_match_model_and_manifest(tmp_path):
    cfg = tiny_config(tmp_path)
    result = run_evolution(cfg)
    assert result.model_path.read_text() == model_to_text(result.spec)
    manifest = json.loads(result.manifest_path.read_text())
    assert manifest["format"] == "spin-run-manifest/1"
    assert manifest["n_records"] == len(result.records)
    assert manifest["config"] == config_to_dict(cfg)
    header = result.csv_path.read_text().splitlines()[0]
    assert header.startswith("t,sigma,delta_fitted,delta_uniform,b_fitted,purity")


def test_run_determinism(tmp_path):
    cfg_a = tiny_config(tmp_path, output_dir=str(tmp_path / "a"))
    cfg_b = tiny_config(tmp_path, output_dir=str(tmp_path / "b"))
    res_a = run_evolution(cfg_a)
    res_b = run_evolution(cfg_b)
    assert res_a.csv_path.read_bytes() == res_b.csv_path.read_bytes()
    assert res_a.model_path.read_bytes() == res_b.model_path.read_bytes()


def make_records(values):
    return [TimeSeriesRecord(t=float(k), sigma=v, delta_fitted=v,
                             delta_uniform=v / 2, b_fitted=0.1, purity=1.0,
                             trace_diag_sq=1.0, energy=0.0, norm_error=0.0)
            for k, v in enumerate(values)]


def test_time_average_constant_and_sawtooth():
    records = make_records([0.7] * 12)
    avg = time_average(records, (0.0, 11.0))
    assert avg.sigma == pytest.approx(0.7)
    assert avg.delta_uniform == pytest.approx(0.35)
    assert avg.b_fitted == pytest.approx(0.1)

    saw = make_records([0, 1, 2, 3, 4, 5, 5, 4, 3, 2, 1, 0])
    avg = time_average(saw, (0.0, 11.0))
    assert avg.sigma == pytest.approx(2.5)


def test_time_average_errors():
    records = make_records([1.0] * 12)
    with pytest.raises(ValueError):
        time_average(records, (5.0, 5.0))
    with pytest.raises(ValueError):
        time_average(records, (0.0, 50.0))  # beyond span
    with pytest.raises(ValueError):
        time_average(records, (8.0, 11.0))  # only 4 samples
    with pytest.raises(ValueError):
        time_average([], (0.0, 1.0))


def test_time_average_skips_undefined_b():
    records = make_records([1.0] * 12)
    records[3] = TimeSeriesRecord(t=3.0, sigma=1.0, delta_fitted=float("nan"),
                                  delta_uniform=0.5, b_fitted=float("nan"),
                                  purity=1.0, trace_diag_sq=1.0, energy=0.0,
                                  norm_error=0.0)
    avg = time_average(records, (0.0, 11.0))
    assert avg.b_fitted == pytest.approx(0.1)


def test_sweep_rows_and_workers_determinism(tmp_path):
    cfg = ExperimentConfig(n_env=2, case="I", n_system=3, tau=4.0, t_max=120.0,
                           output_dir=str(tmp_path / "w1"), seeds=Seeds())
    serial = scaling_sweep(cfg, [2, 3, 4], workers=1)
    parallel = scaling_sweep(
        ExperimentConfig(n_env=2, case="I", n_system=3, tau=4.0, t_max=120.0,
                         output_dir=str(tmp_path / "w2"), seeds=Seeds()),
        [2, 3, 4], workers=2)
    assert serial.csv_path.read_bytes() == parallel.csv_path.read_bytes()
    for ne in (2, 3, 4):
        a = (tmp_path / "w1" / f"ne{ne:02d}" / "trajectory.csv").read_bytes()
        b = (tmp_path / "w2" / f"ne{ne:02d}" / "trajectory.csv").read_bytes()
        assert a == b
    assert [r.n_env for r in serial.rows] == [2, 3, 4]
    assert math.isfinite(serial.slope_ln_sigma)
    summary = json.loads((tmp_path / "w1" / "sweep_summary.json").read_text())
    assert summary["slope_ln_sigma_per_n_env"] == serial.slope_ln_sigma


def test_sweep_rejects_empty_list(tmp_path):
    with pytest.raises(ValueError):
        scaling_sweep(tiny_config(tmp_path), [])


def test_mc_guards():
    with pytest.raises(ValueError):
        mc_expectation(1, 2, 1000, 0)
    with pytest.raises(ValueError):
        mc_expectation(2, 0, 1000, 0)
    with pytest.raises(ValueError):
        mc_expectation(2, 2, 99, 0)
    with pytest.raises(ValueError):
        mc_expectation(2, 1 << 21, 100, 0)


def test_mc_determinism():
    a = mc_expectation(4, 4, 500, seed=3)
    b = mc_expectation(4, 4, 500, seed=3)
    assert a == b


def test_track_components_blocks(tmp_path):
    cfg = tiny_config(tmp_path, n_system=4, n_env=2, tau=2.0, t_max=30.0)
    result = track_components(cfg)
    header = result.csv_path.read_text().splitlines()[0].split(",")
    moduli_cols = [c for c in header if c.startswith("rho_")]
    assert len(moduli_cols) == 16 + 120
    d = 16
    iu = list(zip(*np.triu_indices(d, 0)))
    diag_cols = [k for k, (i, j) in enumerate(iu) if i == j]
    off_cols = [k for k, (i, j) in enumerate(iu) if i != j]
    for rec in result.records:
        mods = np.asarray(rec.moduli)
        assert mods[diag_cols].sum() == pytest.approx(1.0, abs=1e-10)
        assert (mods[off_cols] ** 2).sum() == pytest.approx(rec.sigma ** 2,
                                                            abs=1e-12)


def test_infeasible_swb_config_raises(tmp_path):
    cfg = tiny_config(tmp_path, n_system=4, n_env=4, swb_env_count=3)
    with pytest.raises(ValueError):
        run_evolution(cfg)


def test_norm_drift_aborts_run(tmp_path, monkeypatch):
    import spinbath.experiments as exp

    def leaky_step(spec, plan, state):
        return type(state)(state.n_qubits, state.amplitudes * 1.001)

    monkeypatch.setattr(exp, "chebyshev_step", leaky_step)
    cfg = tiny_config(tmp_path)
    with pytest.raises(RuntimeError, match="norm drifted"):
        run_evolution(cfg)


def test_mc_matches_hypersphere_split_example():
    # 10-qubit register split 4|256: expected 2 sigma^2 is 3/1025
    r = mc_expectation(4, 256, 1000, seed=6)
    assert r.expected_two_sigma_sq == pytest.approx(3 / 1025, abs=1e-15)
    assert abs(r.mean_two_sigma_sq - 3 / 1025) < 3 * r.se_two_sigma_sq
