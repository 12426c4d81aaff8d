import json
import warnings
from pathlib import Path

import pytest

from riesz_lab.api import create_app
from riesz_lab.cache import ArtifactCache
from riesz_lab.cli import main
from riesz_lab.experiments import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, RunStore
from riesz_lab.hermite import hermite_1d
from riesz_lab.transform import read_expansion

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
WEYL = {"experiment": {"kind": "weyl_identity", "n": 1}, "parameters": {"K": 12, "center": 9.0}}


@pytest.fixture
def client(tmp_path):
    app = create_app(RunStore(tmp_path / "runs"), ArtifactCache(tmp_path / "cache"))
    with TestClient(app) as c:
        yield c


def test_health_and_experiments(client):
    assert client.get("/health").json()["status"] == "ok"
    kinds = {item["kind"] for item in client.get("/experiments").json()}
    assert "trace_slope" in kinds and len(kinds) == 9


def test_run_lifecycle(client):
    resp = client.post("/runs", json=WEYL)
    assert resp.status_code == 200
    body = resp.json()
    assert body["verdict"] == "pass" and body["exit_code"] == 0
    rid = body["run_id"]
    assert client.get("/runs").json() == [rid]
    assert client.get(f"/runs/{rid}").json()["run_id"] == rid
    csv_text = client.get(f"/runs/{rid}/csv").text
    assert csv_text.startswith("# riesz-lab-results v1\n")
    assert client.get("/runs/0123456789abcdef").status_code == 404


def test_run_config_error_is_422(client):
    resp = client.post("/runs", json={"experiment": {"kind": "weyl_identity"}, "parameters": {"K": 4}})
    assert resp.status_code == 422
    assert "parameters.center" in resp.json()["detail"]


def test_run_numerical_failure_is_500(client):
    cfg = {"experiment": {"kind": "trace_slope", "n": 3}, "parameters": {"alpha": 1.0, "k": [60, 61, 62, 63]}}
    resp = client.post("/runs", json=cfg)
    assert resp.status_code == 500
    assert "trace_slope" in resp.json()["detail"]


def test_hermite_values(client):
    resp = client.post("/hermite/values", json={"k": 3, "t": [0.0, 0.5, -1.0]})
    assert resp.json()["values"] == pytest.approx(list(hermite_1d(3, [0.0, 0.5, -1.0])), rel=1e-15)
    assert client.post("/hermite/values", json={"k": -1, "t": [0.0]}).status_code == 422


def test_critical_index_endpoint(client):
    body = client.get("/critical-index", params={"p": "inf", "n": 3}).json()
    assert body["critical_index"] == "1" and body["ae_threshold"] == "1/2"
    assert client.get("/critical-index", params={"p": "0.5", "n": 1}).status_code == 422


def test_multiplier_endpoint(client):
    text = "1 4\n0 1.0 0.0\n2 2.0 0.0\n"
    resp = client.post("/expansions/multiplier", json={"expansion": text, "profile": "riesz", "params": {"lam": 1, "R": 2}})
    out = read_expansion(resp.json()["expansion"])
    assert out.coefficient((0,)) == pytest.approx(0.75)
    assert out.coefficient((2,)) == 0
    bad = client.post("/expansions/multiplier", json={"expansion": text, "profile": "nope", "params": {}})
    assert bad.status_code == 422


def test_cache_endpoint(client):
    client.post(
        "/runs",
        json={
            "experiment": {"kind": "square_fn", "seed": 1},
            "parameters": {"alpha": 0.5, "K": 16, "samples": 2, "delta": [0.25, 0.125, 0.0625, 0.03125]},
        },
    )
    info = client.get("/cache").json()
    assert info["enabled"] and len(info["entries"]) == 1 and info["entries"][0]["valid"]


def test_cli_run_and_export(tmp_path, capsys):
    cfg = tmp_path / "w.toml"
    cfg.write_text('[experiment]\nkind = "weyl_identity"\n\n[parameters]\nK = 12\ncenter = 9.0\n')
    out_dir = tmp_path / "out"
    assert main(["run", str(cfg), "--output", str(out_dir)]) == EXIT_PASS
    summary = json.loads(capsys.readouterr().out)
    assert (out_dir / "results.csv").exists()
    assert main(["export", summary["run_id"]]) == EXIT_PASS
    assert capsys.readouterr().out == (out_dir / "results.csv").read_text()
    assert main(["export", "ffffffffffffffff"]) == EXIT_FAIL


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[experiment]\nkind = "trace_slope"\n[parameters]\nalpha = -1\nk = [4, 8, 16, 32]\n')
    assert main(["run", str(cfg)]) == EXIT_CONFIG
    assert "parameters.alpha" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml")]) == EXIT_CONFIG


def test_cli_failing_run_exit_code(tmp_path):
    cfg = tmp_path / "tight.toml"
    cfg.write_text(
        '[experiment]\nkind = "trace_slope"\n[parameters]\nalpha = 2.0\nk = [16, 32, 64, 128]\n[tolerance]\nslope = 1e-9\n'
    )
    assert main(["run", str(cfg)]) == EXIT_FAIL


def test_cli_list_and_show_cache(capsys):
    assert main(["list-experiments"]) == EXIT_PASS
    out = capsys.readouterr().out
    assert "weyl_identity" in out and "sharpness_radial" in out
    assert main(["show-cache"]) == EXIT_PASS
    assert "(empty)" in capsys.readouterr().out


def test_cli_apply(tmp_path, capsys):
    src = tmp_path / "e.txt"
    src.write_text("1 3\n1 1.0 0.0\n3 1.0 0.0\n")
    assert main(["apply", str(src), "--profile", "band", "--param", "a=0", "--param", "b=4"]) == EXIT_PASS
    out = read_expansion(capsys.readouterr().out)
    assert out.coefficient((1,)) == 1.0 and out.coefficient((3,)) == 0.0


def test_shipped_weyl_config_runs(capsys):
    assert main(["run", str(CONFIGS / "weyl_identity.toml")]) == EXIT_PASS
    assert json.loads(capsys.readouterr().out)["mismatch"] < 1e-6
