from __future__ import annotations

import threading
from collections import OrderedDict
from typing import Any, Hashable

from .clock import Clock, system_clock

DEFAULT_CAPACITY = 4096

MISS: Any = object()


class TTLCache:
    """Capacity-bounded LRU cache whose entries expire after their TTL.

    An entry put with ``ttl`` seconds at time ``t`` is served while
    ``now < t + ttl``; a zero TTL is never served.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY, clock: Clock = system_clock) -> None:
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._clock = clock
        self._data: OrderedDict[Hashable, tuple[Any, float, float]] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: Hashable, default: Any = MISS) -> Any:
        with self._lock:
            item = self._data.get(key)
            if item is None:
                return default
            value, inserted_at, ttl = item
            if self._clock() >= inserted_at + ttl:
                del self._data[key]
                return default
            self._data.move_to_end(key)
            return value

    def put(self, key: Hashable, value: Any, ttl: float) -> None:
        with self._lock:
            self._data[key] = (value, self._clock(), float(ttl))
            self._data.move_to_end(key)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def __contains__(self, key: Hashable) -> bool:
        return self.get(key) is not MISS

    def __len__(self) -> int:
        return len(self._data)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()

    def keys(self) -> list[Hashable]:
        with self._lock:
            return list(self._data)
