import importlib

from django.apps import apps
from django.core.exceptions import ImproperlyConfigured

from .settings import get_setting


def autodiscover():
    """
    Auto-discover preset modules (``qem_presets.py`` by default) in all INSTALLED_APPS.
    This function is called when Django starts up.
    """
    module_name = get_setting("QEMFORGE_PRESET_MODULE", "qem_presets")
    for app_config in apps.get_app_configs():
        app_name = app_config.name
        dotted = f"{app_name}.{module_name}"

        try:
            importlib.import_module(dotted)
        except ModuleNotFoundError as e:
            # No preset module in this app, that's fine
            if e.name != dotted:
                msg = f"Error importing {module_name} module from {app_name}: {e}"
                raise ImproperlyConfigured(msg) from e
        except Exception as e:
            # Other errors should be reported
            msg = f"Error importing {module_name} module from {app_name}: {e}"
            raise ImproperlyConfigured(msg) from e
