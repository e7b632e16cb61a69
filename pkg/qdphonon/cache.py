"""Cache management for qdphonon."""
import threading
from datetime import datetime, timedelta
from typing import Any, Dict, Hashable, Optional, Set, Tuple

CacheKey = Tuple[Hashable, ...]


class ResultCache:
    """Thread-safe memo for expensive numerical results.

    Keys are tuples whose first element names the quantity, e.g.
    ``("F", nu_c, T, kappa, delta, weight)``; ``invalidate("F")`` drops every
    entry of that quantity. Concurrent inserts of the same key resolve
    last-write-wins. A ttl of 0 disables expiry. Past ``max_entries`` the
    oldest insert is evicted; 0 means unbounded.
    """

    def __init__(self, ttl: int = 0, max_entries: int = 0):
        self.cache: Dict[CacheKey, Dict[str, Any]] = {}
        self.ttl = ttl
        self.max_entries = max_entries
        self.invalidation_patterns: Dict[Hashable, Set[CacheKey]] = {}
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def _expired(self, entry: Dict[str, Any], now: datetime) -> bool:
        return self.ttl > 0 and now - entry["timestamp"] >= timedelta(seconds=self.ttl)

    def _forget(self, key: CacheKey) -> None:
        del self.cache[key]
        keys = self.invalidation_patterns.get(key[0])
        if keys is not None:
            keys.discard(key)
            if not keys:
                del self.invalidation_patterns[key[0]]

    def get(self, key: CacheKey) -> Optional[Any]:
        """Retrieve a value if it exists and hasn't expired."""
        with self._lock:
            entry = self.cache.get(key)
            if entry is not None:
                if not self._expired(entry, datetime.now()):
                    self.hits += 1
                    return entry["data"]
                self._forget(key)
            self.misses += 1
            return None

    def set(self, key: CacheKey, value: Any) -> None:
        """Store a value with the current timestamp."""
        with self._lock:
            self.cache.pop(key, None)
            self.cache[key] = {"data": value, "timestamp": datetime.now()}
            self.invalidation_patterns.setdefault(key[0], set()).add(key)
            while self.max_entries > 0 and len(self.cache) > self.max_entries:
                self._forget(next(iter(self.cache)))

    def invalidate(self, key_or_prefix: Any) -> None:
        """Drop an exact key, or every key whose first element matches."""
        with self._lock:
            if key_or_prefix in self.cache:
                self._forget(key_or_prefix)
            if not isinstance(key_or_prefix, tuple) and key_or_prefix in self.invalidation_patterns:
                for key in self.invalidation_patterns.pop(key_or_prefix):
                    self.cache.pop(key, None)

    def clear(self) -> None:
        """Clear all cache entries and counters."""
        with self._lock:
            self.cache.clear()
            self.invalidation_patterns.clear()
            self.hits = 0
            self.misses = 0

    def cleanup(self) -> None:
        """Remove expired entries."""
        now = datetime.now()
        with self._lock:
            expired = [k for k, entry in self.cache.items() if self._expired(entry, now)]
            for key in expired:
                self._forget(key)

    def __len__(self) -> int:
        return len(self.cache)
