"""
Test settings functionality for qemforge
"""
import os
from unittest.mock import patch

from django.test import SimpleTestCase, override_settings

from qemforge.settings import (
    DEFAULTS,
    debug_log,
    get_cache_timeout,
    get_setting,
    get_worker_count,
    is_cache_enabled,
    is_debug_mode,
)


class TestSettings(SimpleTestCase):
    """Test settings functionality."""

    def test_get_setting_falls_back_to_library_default(self):
        """Test that unset names resolve to DEFAULTS."""
        self.assertEqual(get_setting('QEMFORGE_BATCH_SIZE'), DEFAULTS['QEMFORGE_BATCH_SIZE'])
        self.assertEqual(get_setting('QEMFORGE_LP_SEED'), 2021)

    def test_get_setting_explicit_default(self):
        """Test getting non-existent setting returns the given default."""
        self.assertEqual(get_setting('QEMFORGE_NONEXISTENT', 'default_value'), 'default_value')
        self.assertIsNone(get_setting('QEMFORGE_NONEXISTENT'))

    @override_settings(QEMFORGE_MAX_RATE=2.5)
    def test_get_setting_custom_value(self):
        """Test that host settings win over defaults."""
        self.assertEqual(get_setting('QEMFORGE_MAX_RATE'), 2.5)

    @override_settings(QEMFORGE_ON=False)
    def test_cache_switch(self):
        """Test the master caching switch."""
        self.assertFalse(is_cache_enabled())

    @override_settings(QEMFORGE_DEBUG_MODE=False)
    def test_debug_mode_off(self):
        """Test debug_log stays silent outside debug mode."""
        self.assertFalse(is_debug_mode())
        with patch('qemforge.settings.logger') as mock_logger:
            debug_log('hidden %s', 'message')
        mock_logger.info.assert_not_called()

    @override_settings(QEMFORGE_DEBUG_MODE=True)
    def test_debug_mode_on_formats_arguments(self):
        """Test debug_log interpolates its arguments."""
        with patch('qemforge.settings.logger') as mock_logger, patch('sys.stderr'):
            debug_log('value=%d', 3)
        mock_logger.info.assert_called_once_with('value=3')

    @override_settings(QEMFORGE_CACHE_TIMEOUT=600)
    def test_cache_timeout(self):
        """Test custom cache timeout."""
        self.assertEqual(get_cache_timeout(), 600)


class TestWorkerCount(SimpleTestCase):
    """Test worker count resolution."""

    @override_settings(QEMFORGE_THREADS=4)
    def test_setting_used_when_nothing_requested(self):
        with patch.dict(os.environ, {}, clear=False):
            os.environ.pop('QEMFORGE_THREADS', None)
            self.assertEqual(get_worker_count(), 4)

    @override_settings(QEMFORGE_THREADS=4)
    def test_environment_caps_request(self):
        with patch.dict(os.environ, {'QEMFORGE_THREADS': '2'}):
            self.assertEqual(get_worker_count(8), 2)
            self.assertEqual(get_worker_count(), 2)
            self.assertEqual(get_worker_count(1), 1)

    def test_non_integer_environment_is_ignored(self):
        with patch.dict(os.environ, {'QEMFORGE_THREADS': 'many'}), patch('sys.stderr'):
            self.assertEqual(get_worker_count(3), 3)

    def test_at_least_one_worker(self):
        with patch.dict(os.environ, {}, clear=False):
            os.environ.pop('QEMFORGE_THREADS', None)
            self.assertEqual(get_worker_count(0), 1)
