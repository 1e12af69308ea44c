from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ReferenceLRU
from ualresolver.cache import MISS, TTLCache
from ualresolver.clock import FakeClock


def test_ttl_boundary():
    clock = FakeClock(100)
    cache = TTLCache(4, clock)
    cache.put("k", 1, 30)
    clock.advance(29.999)
    assert cache.get("k") == 1
    clock.advance(0.001)
    assert cache.get("k") is MISS


def test_zero_ttl_never_served():
    cache = TTLCache(4, FakeClock())
    cache.put("k", 1, 0)
    assert cache.get("k") is MISS


def test_lru_eviction_order():
    cache = TTLCache(2, FakeClock())
    cache.put("a", 1, 10)
    cache.put("b", 2, 10)
    cache.get("a")
    cache.put("c", 3, 10)
    assert "a" in cache and "c" in cache and "b" not in cache


ops = st.lists(st.tuples(
    st.sampled_from(["get", "put", "tick"]),
    st.integers(0, 6),
    st.integers(0, 5),
), max_size=80)


@settings(max_examples=200)
@given(st.integers(1, 4), ops)
def test_matches_reference_lru(capacity, program):
    clock = FakeClock(0)
    cache, ref = TTLCache(capacity, clock), ReferenceLRU(capacity)
    for op, key, arg in program:
        if op == "put":
            cache.put(key, (key, arg), arg)
            ref.put(key, (key, arg), arg, clock())
        elif op == "get":
            got = cache.get(key, None)
            assert got == ref.get(key, clock())
        else:
            clock.advance(arg)
    assert len(cache) <= capacity
