from django.apps import AppConfig


class QemForgeConfig(AppConfig):
    name = "qemforge"
    verbose_name = "QEM Forge"

    def ready(self):
        """
        This method is called when the app is ready.
        Auto-discover preset modules in all installed apps so models and noise presets resolve by name.
        """
        from .autodiscover import autodiscover

        autodiscover()
