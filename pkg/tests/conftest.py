import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@pytest.fixture(autouse=True)
def _isolated_dirs(tmp_path, monkeypatch):
    monkeypatch.setenv("RIESZ_LAB_CACHE", str(tmp_path / "cache"))
    monkeypatch.setenv("RIESZ_LAB_RUNS", str(tmp_path / "runs"))
    monkeypatch.delenv("RIESZ_LAB_NO_CACHE", raising=False)
