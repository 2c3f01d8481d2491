"""
Test apps module for qemforge
"""
from unittest.mock import patch

from django.apps import apps
from django.test import SimpleTestCase

from qemforge.apps import QemForgeConfig


class TestQemForgeConfig(SimpleTestCase):
    """Test the Django app configuration."""

    def test_app_config_name(self):
        """Test that app config has correct name."""
        config = QemForgeConfig.create("qemforge")
        self.assertEqual(config.name, "qemforge")
        self.assertEqual(config.verbose_name, "QEM Forge")

    def test_installed_app_uses_config(self):
        """Test that the installed app resolves to QemForgeConfig."""
        self.assertIsInstance(apps.get_app_config("qemforge"), QemForgeConfig)

    @patch("qemforge.autodiscover.autodiscover")
    def test_ready_calls_autodiscover(self, mock_autodiscover):
        """Test that ready() method calls autodiscover."""
        config = QemForgeConfig.create("qemforge")
        config.ready()
        mock_autodiscover.assert_called_once()
