import logging
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class ValueCache:
    """In-process memo for per-subset value estimates of one run"""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._store: Dict[str, Any] = {}
        self.hits = 0
        self.misses = 0

    def get(self, key: str) -> Optional[Any]:
        """Get value from the cache, None when absent or disabled"""
        if not self.enabled:
            self.misses += 1
            return None
        if key in self._store:
            self.hits += 1
            return self._store[key]
        self.misses += 1
        return None

    def set(self, key: str, value: Any) -> bool:
        """Store a value; no-op when disabled"""
        if not self.enabled:
            return False
        self._store[key] = value
        return True

    def exists(self, key: str) -> bool:
        return self.enabled and key in self._store

    def delete(self, key: str) -> bool:
        return self._store.pop(key, None) is not None

    def clear(self) -> None:
        self._store.clear()
        self.hits = 0
        self.misses = 0

    def stats(self) -> Dict[str, int]:
        return {"entries": len(self._store), "hits": self.hits, "misses": self.misses}


# Cache key generators
def get_value_cache_key(strategy: str, subset_key: str) -> str:
    """Generate cache key for a subset value estimate"""
    return f"value:{strategy}:{subset_key}"
