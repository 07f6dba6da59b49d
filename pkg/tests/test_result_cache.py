import pytest

from mre_spring.core.energy_torque import CoenergySample
from mre_spring.services.result_cache import ResultCache


def _sample(theta=0.5, w_co=1.2345678901234567e-3):
    return CoenergySample(
        theta=theta,
        w_co=w_co,
        solver_stats=({"method": "direct", "dofs": 10, "residual": 1e-15},),
        n_elements=42,
    )


def test_roundtrip_is_bit_identical(tmp_path):
    cache = ResultCache(tmp_path)
    sample = _sample(w_co=0.1 + 0.2)
    cache.put("abc", sample)

    fresh = ResultCache(tmp_path)
    loaded = fresh.get("abc")
    assert loaded == sample
    assert loaded.w_co == 0.1 + 0.2
    assert fresh.hits == 1


def test_miss_and_hit_counters(tmp_path):
    cache = ResultCache(tmp_path)
    assert cache.get("missing") is None
    cache.put("k", _sample())
    assert cache.get("k") is not None
    assert (cache.hits, cache.misses) == (1, 1)


def test_lru_eviction_keeps_files(tmp_path):
    cache = ResultCache(tmp_path, max_size=2)
    for i, key in enumerate(["a", "b", "c"]):
        cache.put(key, _sample(theta=float(i)))
    assert len(cache) == 2
    assert "a" not in cache.memory
    # 内存淘汰后仍可从文件读回
    assert cache.get("a").theta == 0.0


def test_atomic_write_leaves_no_temp_files(tmp_path):
    cache = ResultCache(tmp_path)
    cache.put("k1", _sample())
    cache.put("k1", _sample(theta=1.0))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["k1.json"]


def test_corrupt_entry_is_a_miss(tmp_path):
    (tmp_path / "bad.json").write_text("{not json", encoding="utf-8")
    cache = ResultCache(tmp_path)
    assert cache.get("bad") is None
    assert cache.misses == 1


@pytest.mark.parametrize("max_size", [1, 3])
def test_memory_bounded(tmp_path, max_size):
    cache = ResultCache(tmp_path, max_size=max_size)
    for i in range(5):
        cache.put(f"k{i}", _sample(theta=float(i)))
    assert len(cache) == max_size
