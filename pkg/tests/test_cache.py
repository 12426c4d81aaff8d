import numpy as np
import pytest

from riesz_lab.cache import ArtifactCache, rule_from_bytes, rule_to_bytes
from riesz_lab.hermite import HermiteTable
from riesz_lab.quadrature import build_rule


def test_rule_bytes_round_trip():
    rule = build_rule(10, 1.5, order=16)
    back = rule_from_bytes(rule_to_bytes(rule, 16))
    np.testing.assert_array_equal(back.nodes, rule.nodes)
    np.testing.assert_array_equal(back.weights, rule.weights)
    assert back.design_degree == 10 and back.weight_exponent == 1.5


def test_rule_bytes_rejects_garbage():
    with pytest.raises(ValueError):
        rule_from_bytes(b"nope")
    blob = rule_to_bytes(build_rule(3), 24)
    with pytest.raises(ValueError):
        rule_from_bytes(blob[:-8])
    with pytest.raises(ValueError):
        rule_from_bytes(b"XXXX" + blob[4:])


def test_reload_is_byte_identical(tmp_path):
    cache = ArtifactCache(tmp_path)
    cold = cache.rule(20, 2.0)
    files = sorted((tmp_path / "artifacts").glob("*.bin"))
    assert len(files) == 1
    blob = files[0].read_bytes()
    warm = ArtifactCache(tmp_path).rule(20, 2.0)
    assert rule_to_bytes(warm, 24) == rule_to_bytes(cold, 24) == blob


def test_table_round_trip(tmp_path):
    cache = ArtifactCache(tmp_path)
    t1 = cache.hermite_table(12)
    t2 = ArtifactCache(tmp_path).hermite_table(12)
    assert t1.to_bytes() == t2.to_bytes()
    direct = HermiteTable.build(12, build_rule(12).nodes)
    assert direct.to_bytes() == t1.to_bytes()


def test_corrupt_entry_rebuilds_with_warning(tmp_path):
    cache = ArtifactCache(tmp_path)
    good = rule_to_bytes(cache.rule(8), 24)
    path = next((tmp_path / "artifacts").glob("rule-*.bin"))
    raw = bytearray(path.read_bytes())
    raw[-3] ^= 0xFF
    path.write_bytes(bytes(raw))
    assert not cache.entries()[0].valid
    with pytest.warns(UserWarning, match="checksum"):
        again = cache.rule(8)
    assert rule_to_bytes(again, 24) == good
    assert all(e.valid for e in cache.entries())


def test_missing_sidecar_rebuilds(tmp_path):
    cache = ArtifactCache(tmp_path)
    cache.rule(4)
    next((tmp_path / "artifacts").glob("*.sha256")).unlink()
    with pytest.warns(UserWarning):
        cache.rule(4)


def test_disabled_cache_writes_nothing(tmp_path, monkeypatch):
    monkeypatch.setenv("RIESZ_LAB_NO_CACHE", "1")
    cache = ArtifactCache(tmp_path)
    assert not cache.enabled
    rule = cache.rule(9)
    assert not (tmp_path / "artifacts").exists()
    assert rule_to_bytes(rule, 24) == rule_to_bytes(ArtifactCache(tmp_path / "other").rule(9), 24)


def test_env_root(tmp_path, monkeypatch):
    monkeypatch.setenv("RIESZ_LAB_CACHE", str(tmp_path / "x"))
    assert ArtifactCache().root == tmp_path / "x"


def test_clear(tmp_path):
    cache = ArtifactCache(tmp_path)
    cache.hermite_table(5)
    assert len(cache.entries()) == 2
    assert cache.clear() == 4
    assert cache.entries() == []
