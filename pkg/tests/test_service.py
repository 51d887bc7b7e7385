import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from spinbath import __version__
from spinbath.cli import main
from spinbath.service.app import app, jobs


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    body = client.get("/health").json()
    assert body == {"status": "ok", "version": __version__}


def test_predict_endpoint(client):
    resp = client.post("/predict", json={"d_system": 16, "d_env": 4})
    assert resp.status_code == 200
    body = resp.json()
    assert body["sigma_expected"] == pytest.approx(0.33968, rel=1e-4)
    assert body["sigma_isolated"] == pytest.approx(0.66421, rel=1e-4)

    assert client.post("/predict", json={"d_system": 1, "d_env": 4}).status_code == 422
    assert client.post("/predict", json={"d_system": 16}).status_code == 422


def test_mc_endpoint(client):
    resp = client.post("/mc", json={"d_system": 2, "d_env": 2,
                                    "samples": 500, "seed": 1})
    assert resp.status_code == 200
    body = resp.json()
    assert body["expected_two_sigma_sq"] == pytest.approx(0.2)
    assert abs(body["mean_two_sigma_sq"] - 0.2) < 4 * body["se_two_sigma_sq"]
    # isolated variant: d_env omitted
    resp = client.post("/mc", json={"d_system": 4, "samples": 500, "seed": 1})
    assert resp.json()["expected_two_sigma_sq"] == pytest.approx(0.6)


def run_config(tmp_path, **overrides):
    doc = {"n_env": 3, "n_system": 3, "case": "I", "tau": 2.0, "t_max": 50.0,
           "output_dir": str(tmp_path / "run")}
    doc.update(overrides)
    return doc


def test_evolve_endpoint(client, tmp_path):
    resp = client.post("/evolve", json={"config": run_config(tmp_path)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["n_records"] == 26
    assert (tmp_path / "run" / "trajectory.csv").exists()
    assert (tmp_path / "run" / "model.txt").exists()
    assert (tmp_path / "run" / "manifest.json").exists()


def test_evolve_rejects_unknown_key(client, tmp_path):
    bad = run_config(tmp_path, bogus=1)
    assert client.post("/evolve", json={"config": bad}).status_code == 422


def test_domain_error_maps_to_400(client, tmp_path):
    bad = run_config(tmp_path, n_env=4, swb_env_count=5)
    resp = client.post("/evolve", json={"config": bad})
    assert resp.status_code == 400
    assert "SWB" in resp.json()["detail"]


def test_sweep_endpoint(client, tmp_path):
    resp = client.post("/sweep", json={"config": run_config(tmp_path),
                                       "n_env_list": [2, 3]})
    assert resp.status_code == 200
    body = resp.json()
    assert [row["n_env"] for row in body["rows"]] == [2, 3]
    assert (tmp_path / "run" / "sweep.csv").exists()


def test_track_endpoint(client, tmp_path):
    resp = client.post("/track", json={"config": run_config(tmp_path,
                                                            n_system=2)})
    assert resp.status_code == 200
    header = (tmp_path / "run" / "trajectory.csv").read_text().splitlines()[0]
    assert "rho_0_0" in header


def test_job_flow(client, tmp_path):
    resp = client.post("/jobs/evolve", json={"config": run_config(tmp_path)})
    job_id = resp.json()["job_id"]
    status = jobs.wait(job_id, timeout=120)
    assert status.status == "done"
    assert status.result["n_records"] == 26
    listed = client.get("/jobs").json()
    assert any(j["job_id"] == job_id for j in listed)
    polled = client.get(f"/jobs/{job_id}").json()
    assert polled["status"] == "done"
    assert client.get("/jobs/nope").status_code == 404


def test_job_error_is_reported(client, tmp_path):
    bad = run_config(tmp_path, n_env=4, swb_env_count=5)
    job_id = client.post("/jobs/evolve", json={"config": bad}).json()["job_id"]
    status = jobs.wait(job_id, timeout=60)
    assert status.status == "error"
    assert "SWB" in status.error


def test_cli_predict():
    runner = CliRunner()
    result = runner.invoke(main, ["predict", "--ds", "16", "--ne", "8"])
    assert result.exit_code == 0, result.output
    fields = dict(line.split(" ", 1) for line in result.output.strip().splitlines())
    assert float(fields["sigma_expected"]) == pytest.approx(4.279e-2, rel=1e-3)
    assert fields["d_env"] == "256"

    both = runner.invoke(main, ["predict", "--ds", "16", "--ne", "8",
                                "--de", "256"])
    assert both.exit_code != 0
    neither = runner.invoke(main, ["predict", "--ds", "16"])
    assert neither.exit_code != 0


def test_cli_mc():
    runner = CliRunner()
    result = runner.invoke(main, ["mc", "--ds", "2", "--de", "2",
                                  "--samples", "300", "--seed", "7"])
    assert result.exit_code == 0, result.output
    assert "expected_two_sigma_sq 0.2" in result.output


def test_cli_evolve_and_track(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(run_config(tmp_path)))
    runner = CliRunner()
    result = runner.invoke(main, ["evolve", str(cfg_path)])
    assert result.exit_code == 0, result.output
    assert "sigma_bar" in result.output
    assert (tmp_path / "run" / "trajectory.csv").exists()

    result = runner.invoke(main, ["track", str(cfg_path)])
    assert result.exit_code == 0, result.output


def test_cli_sweep(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(run_config(tmp_path)))
    runner = CliRunner()
    result = runner.invoke(main, ["sweep", str(cfg_path), "--ne", "2,3"])
    assert result.exit_code == 0, result.output
    assert "slope_ln_sigma" in result.output

    bad = runner.invoke(main, ["sweep", str(cfg_path), "--ne", "2,x"])
    assert bad.exit_code != 0


@pytest.fixture(scope="module")
def live_server():
    import socket
    import threading
    import time

    import uvicorn

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    for _ in range(200):
        if server.started:
            break
        time.sleep(0.05)
    else:
        pytest.fail("service did not start")
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def test_cli_over_http(live_server):
    runner = CliRunner()
    result = runner.invoke(main, ["--server", live_server, "predict",
                                  "--ds", "16", "--ne", "4"])
    assert result.exit_code == 0, result.output
    fields = dict(line.split(" ", 1) for line in result.output.strip().splitlines())
    assert float(fields["sigma_expected"]) == pytest.approx(1.708e-1, rel=1e-3)

    result = runner.invoke(main, ["--server", live_server, "mc", "--ds", "2",
                                  "--de", "2", "--samples", "200"])
    assert result.exit_code == 0, result.output
    assert "expected_two_sigma_sq 0.2" in result.output

    # client-side validation failure becomes a readable CLI error
    result = runner.invoke(main, ["--server", live_server, "mc", "--ds", "2",
                                  "--de", "2", "--samples", "5"])
    assert result.exit_code != 0
    assert "samples" in result.output

    # server-side domain failure propagates the HTTP status
    result = runner.invoke(main, ["--server", live_server, "mc", "--ds", "4",
                                  "--de", str(1 << 20), "--samples", "200"])
    assert result.exit_code != 0
    assert "400" in result.output


def test_cli_bad_config(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(run_config(tmp_path, bogus=3)))
    runner = CliRunner()
    result = runner.invoke(main, ["evolve", str(cfg_path)])
    assert result.exit_code != 0
    assert "invalid config" in result.output

    missing = runner.invoke(main, ["evolve", str(tmp_path / "absent.json")])
    assert missing.exit_code != 0
