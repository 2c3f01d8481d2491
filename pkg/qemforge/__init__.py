"""QEM Forge - stochastic error mitigation for continuous quantum evolution, as a Django app."""

# Import main components for easy access
from .cache import invalidate_tables
from .registry import PresetRegistry, preset_register, preset_registry

__version__ = "0.1.0"

default_app_config = "qemforge.apps.QemForgeConfig"


__all__ = [
    "PresetRegistry",
    "invalidate_tables",
    "preset_register",
    "preset_registry",
]
