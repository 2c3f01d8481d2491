import logging
import os
import sys

from django.conf import settings

# Configure logger for qemforge debug messages
logger = logging.getLogger("qemforge")

DEFAULTS = {
    "QEMFORGE_ON": True,
    "QEMFORGE_DEBUG_MODE": False,
    "QEMFORGE_CACHE_TIMEOUT": None,
    "QEMFORGE_CACHE_MAX_TABLES": 256,
    "QEMFORGE_THREADS": 1,
    "QEMFORGE_BATCH_SIZE": 512,
    "QEMFORGE_DENSE_MAX_QUBITS": 4,
    "QEMFORGE_MAX_RATE": 10.0,
    "QEMFORGE_LP_SEED": 2021,
    "QEMFORGE_PRESET_MODULE": "qem_presets",
}


def ensure_configured(**overrides):
    """
    Configure Django for standalone use (CLI, scripts, notebooks).

    Inside a Django project the host settings are used untouched.
    """
    if not settings.configured and not os.environ.get("DJANGO_SETTINGS_MODULE"):
        settings.configure(
            INSTALLED_APPS=["qemforge"],
            CACHES={
                "default": {
                    "BACKEND": "django.core.cache.backends.locmem.LocMemCache",
                    "LOCATION": "qemforge",
                }
            },
            USE_TZ=True,
            **overrides,
        )
    import django
    from django.apps import apps

    if not apps.ready:
        django.setup()


def get_setting(name, default=None):
    """Get a qemforge setting, falling back to the library default."""
    if default is None:
        default = DEFAULTS.get(name)
    return getattr(settings, name, default)


def is_cache_enabled():
    """Check if computed-table caching is enabled globally."""
    return get_setting("QEMFORGE_ON", True)


def is_debug_mode():
    """Check if debug mode is enabled."""
    return get_setting("QEMFORGE_DEBUG_MODE", False)


def get_cache_timeout():
    return get_setting("QEMFORGE_CACHE_TIMEOUT", None)


def get_cache_max_tables():
    """Largest number of tables tracked per namespace; older ones are evicted."""
    return get_setting("QEMFORGE_CACHE_MAX_TABLES", 256)


def get_worker_count(requested=None):
    """
    Resolve the worker count for trajectory dispatch.

    The QEMFORGE_THREADS environment variable caps whatever was requested.
    """
    workers = requested if requested is not None else get_setting("QEMFORGE_THREADS", 1)
    cap = os.environ.get("QEMFORGE_THREADS")
    if cap:
        try:
            workers = min(workers, int(cap))
        except ValueError:
            debug_log("Ignoring non-integer QEMFORGE_THREADS=%r", cap)
    return max(1, int(workers))


def debug_log(message, *args):
    """Log debug message if debug mode is enabled."""
    if is_debug_mode():
        if args:
            message %= args
        logger.info(message)
        # stdout carries CSV output, so echo to stderr
        print(f"[qemforge] {message}", file=sys.stderr)  # noqa: T201


def integration_log(kind, t_end, n_qubits):
    """Log a finished integration."""
    debug_log("Integrated %s evolution of %d qubit(s) to t=%.6g us", kind, n_qubits, t_end)


def schedule_log(n_schedules, mean_jumps):
    """Log pre-sampled jump schedules."""
    debug_log("Sampled %d jump schedules, mean %.4f jumps per run", n_schedules, mean_jumps)


def table_hit_log(cache_key):
    """Log when a computed table is served from cache."""
    debug_log("Retrieving table '%s' from cache", cache_key)


def table_miss_log(cache_key):
    """Log when a computed table has to be built."""
    debug_log("Cache miss for table '%s' - computing", cache_key)


def table_invalidation_log(cache_key):
    """Log when a cached table is invalidated."""
    debug_log("'%s' invalidated.", cache_key)


def cache_disabled():
    """Log when table caching is switched off."""
    debug_log("qemforge table cache is disabled.")


def batch_log(start, stop, workers):
    """Log a dispatched trajectory batch."""
    debug_log("Dispatching trajectories [%d, %d) on %d worker(s)", start, stop, workers)


def generic_message(message):
    """Log a generic message."""
    debug_log("%s", message)
