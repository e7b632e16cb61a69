"""
Tests for the result cache.
"""
import threading
import time

from qdphonon.cache import ResultCache


def test_cache_initialization():
    """Test cache initialization without expiry."""
    cache = ResultCache()
    assert cache.ttl == 0
    assert len(cache) == 0
    assert cache.hits == cache.misses == 0


def test_cache_set_and_get():
    """Test basic set and get with tuple keys."""
    cache = ResultCache()
    cache.set(("F", 7.9, 4.0, 6.84, 0.0, "printed"), 0.3063)
    cache.set(("phi0", 7.9, 4.0), 32.09)
    assert cache.get(("F", 7.9, 4.0, 6.84, 0.0, "printed")) == 0.3063
    assert cache.get(("phi0", 7.9, 4.0)) == 32.09
    assert cache.hits == 2


def test_cache_nonexistent_key():
    """Test a miss returns None and is counted."""
    cache = ResultCache()
    assert cache.get(("gamma_pd", 7.9, 10.0)) is None
    assert cache.misses == 1


def test_cache_overwrite():
    """Test overwriting an existing entry."""
    cache = ResultCache()
    cache.set(("phi0", 7.9, 4.0), 1.0)
    cache.set(("phi0", 7.9, 4.0), 2.0)
    assert cache.get(("phi0", 7.9, 4.0)) == 2.0
    assert len(cache) == 1


def test_cache_ttl():
    """Test entries expire after the TTL."""
    cache = ResultCache(ttl=1)
    cache.set(("phi0", 7.9, 4.0), 1.0)
    assert cache.get(("phi0", 7.9, 4.0)) == 1.0
    time.sleep(1.2)
    assert cache.get(("phi0", 7.9, 4.0)) is None
    assert len(cache) == 0


def test_cache_cleanup():
    """Test cleanup drops expired entries only."""
    cache = ResultCache(ttl=1)
    cache.set(("phi0", 7.9, 4.0), 1.0)
    time.sleep(1.2)
    cache.set(("phi0", 7.9, 10.0), 2.0)
    cache.cleanup()
    assert len(cache) == 1
    assert cache.get(("phi0", 7.9, 10.0)) == 2.0


def test_cache_invalidate_quantity():
    """Test invalidating by quantity name drops all of its keys."""
    cache = ResultCache()
    cache.set(("F", 7.9, 4.0), 0.3)
    cache.set(("F", 7.9, 22.0), 0.4)
    cache.set(("phi0", 7.9, 4.0), 1.0)
    cache.invalidate("F")
    assert len(cache) == 1
    assert cache.get(("phi0", 7.9, 4.0)) == 1.0


def test_cache_invalidate_exact_key():
    """Test invalidating one key leaves its siblings."""
    cache = ResultCache()
    cache.set(("F", 7.9, 4.0), 0.3)
    cache.set(("F", 7.9, 22.0), 0.4)
    cache.invalidate(("F", 7.9, 4.0))
    assert cache.get(("F", 7.9, 4.0)) is None
    assert cache.get(("F", 7.9, 22.0)) == 0.4


def test_cache_clear():
    """Test clear empties entries and counters."""
    cache = ResultCache()
    cache.set(("phi0", 1.0, 1.0), 1.0)
    cache.get(("phi0", 1.0, 1.0))
    cache.clear()
    assert len(cache) == 0
    assert cache.hits == 0


def test_cache_concurrent_writes():
    """Test concurrent inserts of one key keep a single entry."""
    cache = ResultCache()
    key = ("gamma_pd", 7.9, 20.0)

    def worker(value):
        for _ in range(200):
            cache.set(key, value)
            cache.get(key)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(cache) == 1
    assert cache.get(key) in range(4)
    assert cache.hits == 801


def test_cache_bounded_size_evicts_oldest():
    """Test a bounded cache drops the oldest insert first."""
    cache = ResultCache(max_entries=3)
    for nu_c in (7.9, 7.9000079, 7.9000158, 7.9000237):
        cache.set(("phi0", nu_c, 4.0), nu_c)
    assert len(cache) == 3
    assert cache.get(("phi0", 7.9, 4.0)) is None
    assert cache.get(("phi0", 7.9000237, 4.0)) == 7.9000237


def test_cache_overwrite_refreshes_age():
    """Test rewriting a key moves it behind newer entries."""
    cache = ResultCache(max_entries=2)
    cache.set(("F", 7.9, 4.0), 0.3)
    cache.set(("F", 7.9, 10.0), 0.35)
    cache.set(("F", 7.9, 4.0), 0.31)
    cache.set(("F", 7.9, 22.0), 0.4)
    assert cache.get(("F", 7.9, 10.0)) is None
    assert cache.get(("F", 7.9, 4.0)) == 0.31
    cache.invalidate("F")
    assert len(cache) == 0
