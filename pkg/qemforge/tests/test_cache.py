"""
Test computed-table caching for qemforge
"""
from unittest.mock import MagicMock, patch

import numpy as np
from django.core.cache import cache
from django.test import SimpleTestCase, override_settings

from qemforge.cache import cached_table, canonical_bytes, invalidate_tables, table_cache_key


class TestCacheKeys(SimpleTestCase):
    """Test cache key generation."""

    def test_key_format(self):
        key = table_cache_key('basis', (1, 2.0, 'x'))
        prefix, namespace, digest = key.split(':')
        self.assertEqual(prefix, 'qemforge')
        self.assertEqual(namespace, 'basis')
        self.assertEqual(len(digest), 32)

    def test_key_is_deterministic(self):
        payload = {'b': np.eye(2), 'a': [0.1, 3]}
        self.assertEqual(table_cache_key('lp', payload), table_cache_key('lp', dict(reversed(payload.items()))))

    def test_key_distinguishes_arrays(self):
        self.assertNotEqual(
            table_cache_key('lp', np.zeros(4)),
            table_cache_key('lp', np.zeros((2, 2))),
        )
        self.assertNotEqual(canonical_bytes(0.1), canonical_bytes(0.1 + 1e-16 * 2))


class TestCachedTable(SimpleTestCase):
    """Test cached_table and invalidate_tables."""

    def setUp(self):
        cache.clear()

    def test_compute_once(self):
        compute = MagicMock(return_value=[1, 2, 3])
        self.assertEqual(cached_table('basis', 'k', compute), [1, 2, 3])
        self.assertEqual(cached_table('basis', 'k', compute), [1, 2, 3])
        compute.assert_called_once()

    @override_settings(QEMFORGE_ON=False)
    def test_disabled_always_computes(self):
        compute = MagicMock(return_value='table')
        cached_table('basis', 'k', compute)
        cached_table('basis', 'k', compute)
        self.assertEqual(compute.call_count, 2)

    @override_settings(CACHES={'default': {'BACKEND': 'django.core.cache.backends.dummy.DummyCache'}})
    def test_dummy_cache_bypassed(self):
        compute = MagicMock(return_value='table')
        cached_table('basis', 'k', compute)
        cached_table('basis', 'k', compute)
        self.assertEqual(compute.call_count, 2)

    def test_invalidate_namespace(self):
        basis = MagicMock(return_value='basis')
        lp = MagicMock(return_value='lp')
        cached_table('basis', 'k', basis)
        cached_table('lp', 'k', lp)
        invalidate_tables('basis')
        cached_table('basis', 'k', basis)
        cached_table('lp', 'k', lp)
        self.assertEqual(basis.call_count, 2)
        self.assertEqual(lp.call_count, 1)

    def test_invalidate_everything(self):
        compute = MagicMock(return_value='table')
        cached_table('basis', 'a', compute)
        cached_table('lp', 'b', compute)
        invalidate_tables()
        cached_table('basis', 'a', compute)
        cached_table('lp', 'b', compute)
        self.assertEqual(compute.call_count, 4)

    def test_invalidate_uses_delete_pattern_when_available(self):
        backend = MagicMock()
        with patch('qemforge.cache._current_cache', return_value=backend):
            invalidate_tables('lp')
        backend.delete_pattern.assert_called_once_with('qemforge:lp:*')

    @override_settings(QEMFORGE_CACHE_MAX_TABLES=2)
    def test_oldest_tables_evicted(self):
        compute = MagicMock(return_value='table')
        for payload in ('a', 'b', 'c'):
            cached_table('lp', payload, compute)
        self.assertEqual(cache.get('qemforge:index')['lp'], [table_cache_key('lp', 'b'), table_cache_key('lp', 'c')])
        self.assertIsNone(cache.get(table_cache_key('lp', 'a')))
        self.assertEqual(cache.get(table_cache_key('lp', 'c')), 'table')

    @override_settings(QEMFORGE_CACHE_MAX_TABLES=2)
    def test_expired_tables_leave_index_first(self):
        compute = MagicMock(return_value='table')
        cached_table('lp', 'a', compute)
        cached_table('lp', 'b', compute)
        cache.delete(table_cache_key('lp', 'b'))
        cached_table('lp', 'c', compute)
        self.assertEqual(cache.get('qemforge:index')['lp'], [table_cache_key('lp', 'a'), table_cache_key('lp', 'c')])
        self.assertEqual(cache.get(table_cache_key('lp', 'a')), 'table')
