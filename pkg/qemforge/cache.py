"""
Memoization of expensive, deterministic tables in the Django cache.

Basis catalogs, LP decompositions and dense propagators depend only on their
inputs, so they are stored under a key derived from a canonical byte payload.
"""

import hashlib

import numpy as np
from django.core.cache import caches
from django.core.cache.backends.dummy import DummyCache

from .settings import (
    cache_disabled,
    generic_message,
    get_cache_max_tables,
    get_cache_timeout,
    is_cache_enabled,
    table_hit_log,
    table_invalidation_log,
    table_miss_log,
)

KEY_PREFIX = "qemforge"
_INDEX_KEY = f"{KEY_PREFIX}:index"


def _current_cache():
    # Fresh lookup so override_settings(CACHES=...) is respected
    return caches["default"]


def canonical_bytes(payload):
    """Serialize a nested payload of numbers, strings, tuples and arrays deterministically."""
    if isinstance(payload, np.ndarray):
        arr = np.ascontiguousarray(payload)
        return b"a" + str(arr.dtype).encode() + str(arr.shape).encode() + arr.tobytes()
    if isinstance(payload, (list, tuple)):
        return b"(" + b",".join(canonical_bytes(item) for item in payload) + b")"
    if isinstance(payload, dict):
        items = sorted(payload.items(), key=lambda kv: str(kv[0]))
        return b"{" + b",".join(canonical_bytes(k) + b":" + canonical_bytes(v) for k, v in items) + b"}"
    if isinstance(payload, float):
        return b"f" + float(payload).hex().encode()
    return repr(payload).encode("utf-8")


def table_cache_key(namespace, payload):
    """Generate the cache key for a computed table."""
    digest = hashlib.md5(canonical_bytes(payload)).hexdigest()
    return f"{KEY_PREFIX}:{namespace}:{digest}"


def cached_table(namespace, payload, compute):
    """
    Return the table stored for ``payload`` or compute and store it.

    Args:
        namespace (str): logical table family, e.g. "basis" or "lp".
        payload: anything accepted by :func:`canonical_bytes`; defines the key.
        compute (callable): zero-argument builder invoked on a miss.

    """
    if not is_cache_enabled():
        cache_disabled()
        return compute()

    current_cache = _current_cache()
    if isinstance(current_cache, DummyCache):
        return compute()

    cache_key = table_cache_key(namespace, payload)
    cached = current_cache.get(cache_key)
    if cached is not None:
        table_hit_log(cache_key)
        return cached

    table_miss_log(cache_key)
    result = compute()
    timeout = get_cache_timeout()
    current_cache.set(cache_key, result, timeout)
    _remember_key(current_cache, namespace, cache_key, timeout)
    return result


def _remember_key(current_cache, namespace, cache_key, timeout):
    index = current_cache.get(_INDEX_KEY) or {}
    keys = [key for key in index.get(namespace, ()) if key != cache_key]
    keys.append(cache_key)
    limit = max(1, get_cache_max_tables())
    if len(keys) > limit:
        # entries that expired on their own drop out first, then the oldest tables
        keys = [key for key in keys if key == cache_key or current_cache.has_key(key)]
        if len(keys) > limit:
            evicted, keys = keys[:-limit], keys[-limit:]
            current_cache.delete_many(evicted)
            for key in evicted:
                table_invalidation_log(key)
    index[namespace] = keys
    current_cache.set(_INDEX_KEY, index, timeout)


def invalidate_tables(namespace=None):
    """
    Invalidate cached tables.

    Args:
        namespace (str | None): only this table family; None clears everything qemforge stored.

    """
    if not is_cache_enabled():
        cache_disabled()
        return

    current_cache = _current_cache()
    if isinstance(current_cache, DummyCache):
        generic_message("DummyCache detected - table invalidation not needed")
        return

    # django-redis style backends can drop by pattern directly
    if hasattr(current_cache, "delete_pattern"):
        pattern = f"{KEY_PREFIX}:{namespace}:*" if namespace else f"{KEY_PREFIX}:*"
        current_cache.delete_pattern(pattern)
        table_invalidation_log(pattern)
        return

    index = current_cache.get(_INDEX_KEY) or {}
    namespaces = [namespace] if namespace else list(index)
    for name in namespaces:
        for cache_key in index.pop(name, ()):
            current_cache.delete(cache_key)
            table_invalidation_log(cache_key)
    current_cache.set(_INDEX_KEY, index, get_cache_timeout())
