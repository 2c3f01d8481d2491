from .exceptions import UnknownPresetError
from .settings import generic_message

PRESET_KINDS = ("model", "noise")


class PresetRegistry:
    """Registry of named benchmark-model and noise builders."""

    def __init__(self):
        self._registry: dict[str, dict[str, object]] = {kind: {} for kind in PRESET_KINDS}

    def _kind(self, kind):
        if kind not in self._registry:
            msg = f"Unknown preset kind {kind!r}; expected one of {PRESET_KINDS}"
            raise UnknownPresetError(msg)
        return self._registry[kind]

    def register(self, kind, name, builder):
        """Register ``builder`` under ``(kind, name)``; a later registration replaces an earlier one."""
        presets = self._kind(kind)
        if name in presets:
            generic_message(f"Replacing {kind} preset '{name}'")
        presets[name] = builder

    def get(self, kind, name):
        presets = self._kind(kind)
        try:
            return presets[name]
        except KeyError:
            known = ", ".join(sorted(presets)) or "none"
            msg = f"Unknown {kind} preset {name!r} (registered: {known})"
            raise UnknownPresetError(msg) from None

    def is_registered(self, kind, name):
        return name in self._kind(kind)

    def names(self, kind):
        return sorted(self._kind(kind))

    def unregister(self, kind, name):
        self._kind(kind).pop(name, None)


# Global registry instance
preset_registry = PresetRegistry()


def preset_register(kind, name):
    """
    Decorator to register a preset builder.

    Usage:
        @preset_register("noise", "relax_dephase")
        def relax_dephase(n_qubits, lambda1, lambda2):
            ...
    """

    def decorator(builder):
        preset_registry.register(kind, name, builder)
        return builder

    return decorator
