import json
from pathlib import Path

import pytest

from riesz_lab.cache import ArtifactCache
from riesz_lab.experiments import (
    CSV_COLUMNS,
    CSV_VERSION,
    DESCRIPTIONS,
    EXIT_FAIL,
    EXIT_PASS,
    ConfigError,
    ExperimentError,
    RunStore,
    load_config,
    parse_config,
    run_experiment,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

WEYL = {"experiment": {"kind": "weyl_identity", "n": 1, "seed": 1}, "parameters": {"K": 16, "center": 13.0}}
RIESZ = {
    "experiment": {"kind": "riesz_converge", "n": 1, "seed": 3},
    "parameters": {"lam": 0.0, "K": 16, "radii": [3.0, 5.0, 6.0, 9.0]},
}
TRACE = {"experiment": {"kind": "trace_slope", "n": 1}, "parameters": {"alpha": 2.0, "k": {"start": 4, "stop": 8}}}


def test_every_kind_has_a_shipped_config():
    kinds = {load_config(p).experiment.kind for p in CONFIGS.glob("*.toml")}
    assert kinds == set(DESCRIPTIONS)


@pytest.mark.parametrize(
    "patch,path",
    [
        ({"parameters": {"alpha": -1.0, "k": [4, 8, 16, 32]}}, "parameters.alpha"),
        ({"parameters": {"alpha": 1.0, "k": []}}, "parameters.k"),
        ({"parameters": {"alpha": 1.0, "k": {"start": 5, "stop": 2}}}, "parameters.k"),
        ({"parameters": {"k": [4, 8, 16, 32]}}, "parameters.alpha"),
        ({"experiment": {"kind": "nope"}}, "experiment.kind"),
        ({"parameters": {"alpha": 1.0, "k": [4, 8, 16, 32], "bogus": 1}}, "parameters.bogus"),
    ],
)
def test_config_errors_name_the_field(patch, path):
    cfg = {"experiment": {"kind": "trace_slope", "n": 1}, **patch}
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        parse_config(cfg)


def test_sharpness_radial_needs_p_above_two():
    with pytest.raises(ConfigError, match="parameters.p"):
        parse_config({"experiment": {"kind": "sharpness_radial", "n": 2}, "parameters": {"p": 2.0, "k": [4, 8]}})


def test_load_config_bad_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[experiment\nkind=")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_run_id_ignores_output_and_tracks_parameters():
    a = parse_config(WEYL)
    b = parse_config({**WEYL, "output": {"dir": "/tmp/elsewhere"}})
    c = parse_config({**WEYL, "experiment": {**WEYL["experiment"], "seed": 2}})
    assert a.run_id() == b.run_id() != c.run_id()
    assert len(a.run_id()) == 16


def test_csv_layout():
    res = run_experiment(parse_config(WEYL))
    lines = res.csv_text().splitlines()
    assert lines[0] == f"# {CSV_VERSION}"
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2 + len(res.rows)


def test_deterministic_csv(tmp_path):
    cfg = parse_config(RIESZ)
    a = run_experiment(cfg, ArtifactCache(tmp_path / "one")).csv_text()
    b = run_experiment(cfg, ArtifactCache(tmp_path / "two")).csv_text()
    assert a == b


SQUARE = {
    "experiment": {"kind": "square_fn", "n": 1, "seed": 5},
    "parameters": {"alpha": 0.5, "K": 24, "samples": 3, "delta": [0.25, 0.125, 0.0625, 0.03125]},
}


def test_cold_warm_and_disabled_cache_agree(tmp_path):
    cfg = parse_config(SQUARE)
    cache = ArtifactCache(tmp_path)
    cold = run_experiment(cfg, cache)
    assert len(cache.entries()) == 1
    warm = run_experiment(cfg, cache)
    off = run_experiment(cfg, ArtifactCache(tmp_path / "off", enabled=False))
    assert cold.rows == warm.rows == off.rows
    assert cold.csv_text() == warm.csv_text() == off.csv_text()


def test_riesz_converge_reaches_exact_reproduction():
    res = run_experiment(parse_config(RIESZ))
    assert res.verdict == "pass"
    errs = [r.measured for r in sorted(res.rows, key=lambda r: r.sort_key())]
    assert errs[-1] < 1e-12
    assert errs[0] > errs[-1]


def test_weyl_identity_passes():
    res = run_experiment(parse_config(WEYL))
    assert res.exit_code == EXIT_PASS
    assert all(r.measured < 1e-6 for r in res.rows)


def test_trace_slope_example():
    cfg = parse_config({**TRACE, "parameters": {"alpha": 2.0, "k": {"start": 6, "stop": 12}}})
    res = run_experiment(cfg)
    assert res.verdict == "pass"
    assert abs(res.summary["slope"] + 0.25) <= 0.05


def test_failing_tolerance_gives_exit_two():
    cfg = parse_config({**TRACE, "tolerance": {"slope": 1e-6}})
    assert run_experiment(cfg).exit_code == EXIT_FAIL


def test_numerical_failure_carries_context():
    cfg = parse_config({"experiment": {"kind": "trace_slope", "n": 3}, "parameters": {"alpha": 1.0, "k": [60, 61, 62, 63]}})
    with pytest.raises(ExperimentError, match=r"trace_slope \(run [0-9a-f]{16}\)"):
        run_experiment(cfg)


def test_run_store_round_trip(tmp_path):
    store = RunStore(tmp_path / "runs")
    res = run_experiment(parse_config(WEYL))
    store.save(res)
    assert store.list() == [res.run_id]
    assert store.csv(res.run_id) == res.csv_text()
    assert store.summary(res.run_id)["verdict"] == res.verdict
    with pytest.raises(KeyError):
        store.summary("../etc")


def test_custom_output_dir_is_mirrored(tmp_path):
    store = RunStore(tmp_path / "runs")
    res = run_experiment(parse_config({**WEYL, "output": {"dir": str(tmp_path / "out")}}))
    store.save(res)
    assert (tmp_path / "out" / "results.csv").read_text() == store.csv(res.run_id)
    assert json.loads((tmp_path / "out" / "summary.json").read_text())["run_id"] == res.run_id
